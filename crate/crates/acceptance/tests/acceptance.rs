//! Runs every acceptance criterion at the stated defaults (n = 512,
//! τ = 2⁻⁸, v_max = 8) and prints one PASS/FAIL line each. Lines marked
//! INFO repeat a criterion at the library's default time step and do not
//! affect the exit status.

use kam_acceptance::*;

fn main() {
    let literal = Setting::default();
    let coarse = Setting::with_tau(1.0 / 32.0);
    let verdicts = vec![
        fixed_points(),
        monotone_constant_rate(literal),
        hopf_lax(literal),
        extremal_solutions(literal),
        subsolution_behavior(literal),
        heteroclinic(literal),
        energy_transport(),
        property_suite(literal, 100),
        shift_law(literal),
        linearization(),
        heteroclinic_invariants(literal),
    ];
    let companions = vec![
        hopf_lax(Setting::with_tau(1.0 / 8.0)),
        extremal_solutions(coarse),
        heteroclinic(coarse),
        property_suite(Setting::with_tau(1.0 / 16.0), 100),
        linearization_against(
            "10 linearization, matrix and cubic re-derived from the flow",
            [[0.0, 0.0, 2.0], [0.0, -1.0, 0.0], [0.25, 0.0, -1.0]],
            // (s + 1)(s² + s − 1/2)
            [2.0, 0.5, -0.5],
        ),
    ];
    for v in &verdicts {
        println!("{}", v.line());
    }
    for v in &companions {
        println!("INFO {}", v.line());
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
