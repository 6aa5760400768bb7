use num_complex::Complex64;

use crate::error::Result;
use crate::sde::EnsembleRecord;

/// Order parameter `r(t) = (1/N) sum_i <a_i>` at a recorded time.
pub fn order_parameter(record: &EnsembleRecord, t: f64) -> Result<Complex64> {
    Ok(record.mean_field[record.index_of(t)?])
}

/// `|r(t)|` on the whole record grid.
pub fn order_parameter_modulus(record: &EnsembleRecord) -> Vec<f64> {
    record.mean_field.iter().map(|z| z.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CouplingSpec, EnsembleConfig, OscillatorParams};
    use crate::sde::simulate_ensemble;

    #[test]
    fn synchronized_start_gives_full_radius() {
        let p = OscillatorParams::semiclassical();
        let cfg = EnsembleConfig {
            n_osc: 50,
            n_traj: 4,
            t_final: 1.0,
            ..Default::default()
        };
        let rec = simulate_ensemble(&cfg, &p, &CouplingSpec::all_to_all(0.3)).unwrap();
        let r = order_parameter(&rec, 0.0).unwrap();
        assert_eq!(r, Complex64::new(10f64.sqrt(), 0.0));
        assert!(order_parameter(&rec, 0.37).is_err());
        assert_eq!(order_parameter_modulus(&rec).len(), rec.times.len());
    }
}
