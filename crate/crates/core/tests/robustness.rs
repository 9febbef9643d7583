use xpsram_core::energy::thermal_tuning_power;
use xpsram_core::{Bitcell, BitcellConfig};

fn hold_both(cfg: &BitcellConfig) -> xpsram_core::Result<()> {
    let mut cell = Bitcell::new(cfg.clone())?;
    for bit in [true, false] {
        cell.write(bit)?;
        cell.hold(10_000.0)?;
        assert_eq!(cell.read()?.decoded().unwrap().0, bit);
    }
    Ok(())
}

#[test]
fn red_shifted_latch_rings_hold_without_tuning() {
    let cfg = BitcellConfig { latch_mismatch_nm: [0.025, 0.025], ..BitcellConfig::default() };
    hold_both(&cfg).unwrap();
}

#[test]
fn blue_shifted_latch_rings_keep_the_bit_but_leave_the_rail_band() {
    let cfg = BitcellConfig { latch_mismatch_nm: [-0.025, -0.025], ..BitcellConfig::default() };
    let mut cell = Bitcell::new(cfg).unwrap();
    cell.write(true).unwrap();
    assert!(cell.hold(10_000.0).is_err());
    let (y, yb) = cell.voltages();
    assert!(y > yb + 0.5, "Y={y} YB={yb}");
    assert!(cell.read().unwrap().decoded().unwrap().0);
}

#[test]
fn heaters_recover_blue_shifted_latch_rings() {
    let base = BitcellConfig::default();
    let p = thermal_tuning_power(0.025, &base.latch_rings[0]).unwrap();
    assert!(p < 0.05, "{p} mW");
    let cfg = BitcellConfig { latch_mismatch_nm: [-0.025, -0.025], latch_heater_mw: [p, p], ..base };
    hold_both(&cfg).unwrap();
}
