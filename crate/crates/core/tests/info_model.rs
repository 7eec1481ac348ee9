//! The closed-form convergence bound next to the simulated first crossing of
//! the same threshold. The derivation bounds the information from above, so
//! neither is asserted to dominate; the table is printed for inspection.

use comp_marl::info::{bound_t_env, bound_t_star, simulate_info, InfoParams};

#[test]
fn closed_form_and_simulation_side_by_side() {
    println!("{:>8} {:>5} {:>12} {:>10} {:>8} {:>8}", "k_star", "F", "t_star", "sim_star", "t_env", "sim_env");
    for &k in &[0.002, 0.005, 0.01] {
        for &f in &[1u32, 5, 10] {
            let p = InfoParams { k_star: k, period_f: f, ..Default::default() };
            let traj = simulate_info(&p, 200_000).unwrap();
            let sim_star = traj.first_star_crossing(&p);
            let sim_env = traj.first_env_crossing(&p);
            let t_star = bound_t_star(&p).ok();
            let t_env = bound_t_env(&p).unwrap();
            println!(
                "{k:>8} {f:>5} {:>12} {:>10} {t_env:>8.2} {:>8}",
                t_star.map_or("invalid".into(), |t| format!("{t:.2}")),
                sim_star.map_or("never".into(), |t| t.to_string()),
                sim_env.map_or("never".into(), |t| t.to_string()),
            );
            // with per-step federation the environment part is exactly geometric
            if f == 1 {
                assert_eq!(sim_env, Some(t_env.ceil() as u64));
            }
            // the simulated state never exceeds its ceiling
            assert!(traj.steps.iter().all(|s| s.i_star <= p.c_star && s.i_env <= p.c_env));
        }
    }
}

#[test]
fn lossless_per_step_federation_crosses_when_the_bound_says() {
    // with no loss and F = 1 the recursion is exactly geometric, so the first
    // crossing is the bound rounded up
    for &k in &[0.001, 0.004, 0.02, 0.05] {
        let p = InfoParams { k_star: k, period_f: 1, loss_enabled: false, ..Default::default() };
        let t = bound_t_star(&p).unwrap();
        let sim = simulate_info(&p, 100_000).unwrap().first_star_crossing(&p).unwrap();
        assert_eq!(sim as f64, t.ceil(), "k_star {k}");
    }
}
