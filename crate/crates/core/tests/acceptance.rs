//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! plus supplementary lines marked with `*`, and exits nonzero when any
//! line fails.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use fk_ground::comparison::{
    contact_propagation, hilbert_identity_check, scenario_graph, ContactScenario, CONTACT_TOL, SCENARIO_TOL,
};
use fk_ground::error::Error;
use fk_ground::foliation::Generator;
use fk_ground::groundstate::{brute_force_oracle, minimize_window, verify_theorem, MinimizeOptions, VerifyOptions};
use fk_ground::hull::solver::{solve_hull, EpsilonSchedule, HullSolution, SolverOptions};
use fk_ground::model::{builtin, FourierPotential, InteractionSpec, LatticeConfiguration, Perturbation};
use fk_ground::site::{cube, interval, widen, Site, SiteSet};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const DEMO_EPSILON: f64 = 0.01;
const SUBCRITICAL_EPSILON: f64 = 0.001;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn alpha() -> Vec<f64> {
    vec![1.0, 2f64.sqrt()]
}

fn qp_spec(eps: f64) -> InteractionSpec {
    builtin::fk_quasiperiodic(Arc::new(FourierPotential::cosine_demo(eps, alpha()))).unwrap()
}

fn periodic(eps: f64) -> Option<Arc<FourierPotential>> {
    Some(Arc::new(FourierPotential::cosine_demo(eps, vec![1.0])))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn short(e: &Error) -> String {
    let s = e.to_string();
    match s.char_indices().nth(240) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s,
    }
}

/// V ≡ 0: the linear family is certified with Γ* = 0 on every window.
fn criterion_1() -> Outcome {
    let spec = builtin::fk_periodic(1, None).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for omega in [0.0, 0.3, GOLDEN] {
        let t = Instant::now();
        let r = match verify_theorem(&spec, Generator::Linear { dim: 1, omega }, &VerifyOptions::default()) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("omega {omega}: {}", short(&e))),
        };
        let dt = t.elapsed();
        let worst = r.reports.iter().map(|g| g.gamma_star.abs()).fold(0.0, f64::max);
        let largest = r.reports.iter().map(|g| g.window_size).max().unwrap_or(0);
        let ok = r.pass && worst <= 1e-12 && largest == 15 && dt < Duration::from_secs(10);
        pass &= ok;
        notes.push(format!(
            "omega {omega:.4}: {} windows, max|gamma| {worst:.1e}, {:.1}s",
            r.reports.len(),
            dt.as_secs_f64()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn hull_within_eight_steps(eps: f64) -> (Result<HullSolution, Error>, Duration) {
    let opts = SolverOptions {
        n_trunc: 32,
        max_iter: 8,
        ..SolverOptions::default()
    };
    let schedule = EpsilonSchedule {
        initial: eps,
        target: eps,
        min_step: eps,
    };
    let t = Instant::now();
    let r = solve_hull(&FourierPotential::cosine_demo(eps, alpha()), GOLDEN, schedule, &opts);
    (r, t.elapsed())
}

/// Newton reaches residual < 1e-12 in at most 8 steps with quadratic ratios.
fn criterion_2(eps: f64) -> Outcome {
    let (r, dt) = hull_within_eight_steps(eps);
    match r {
        Ok(sol) => {
            let steps = sol.newton_steps();
            let res = &sol.final_stage().unwrap().residuals;
            let decreasing = res.windows(2).all(|w| w[1] < w[0]);
            let c = sol.quadratic_constant();
            let pass = sol.residual < 1e-12
                && steps <= 8
                && decreasing
                && c.is_some_and(f64::is_finite)
                && dt < Duration::from_secs(60);
            outcome(
                pass,
                format!(
                    "eps {eps}: residual {:.2e} after {steps} steps, C = {}, margin {:.4}, {:.1}s",
                    sol.residual,
                    c.map_or("n/a".into(), |c| format!("{c:.3e}")),
                    sol.margin,
                    dt.as_secs_f64()
                ),
            )
        }
        Err(e) => outcome(false, format!("eps {eps}: {} ({:.1}s)", short(&e), dt.as_secs_f64())),
    }
}

/// Windows up to 15 sites at 21 β on the hull family: Γ* ≤ 1e-8 and
/// stationarity < 1e-8.
fn criterion_3(eps: f64) -> Outcome {
    let t = Instant::now();
    let sol = solve_hull(
        &FourierPotential::cosine_demo(eps, alpha()),
        GOLDEN,
        EpsilonSchedule::direct(eps),
        &SolverOptions::default(),
    );
    let sol = match sol {
        Ok(s) => s,
        Err(e) => {
            return outcome(
                false,
                format!("eps {eps}: no hull after {:.0}s: {}", t.elapsed().as_secs_f64(), short(&e)),
            )
        }
    };
    let opts = VerifyOptions::default();
    let r = match verify_theorem(&qp_spec(eps), Generator::Hull(Arc::new(sol.hull)), &opts) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("eps {eps}: {}", short(&e))),
    };
    let dt = t.elapsed();
    let gamma = r.reports.iter().map(|g| g.gamma_star).fold(f64::NEG_INFINITY, f64::max);
    let betas: std::collections::BTreeSet<u64> = r.reports.iter().map(|g| g.beta.to_bits()).collect();
    let largest = r.reports.iter().map(|g| g.window_size).max().unwrap_or(0);
    let pass = r.reports.iter().all(|g| g.gamma_star <= 1e-8 && g.stationarity < 1e-8)
        && betas.len() == 21
        && largest == 15
        && dt < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "eps {eps}: {} minimizations, max gamma {gamma:.1e}, max stationarity {:.1e}, {:.1}s",
            r.reports.len(),
            r.max_stationarity,
            dt.as_secs_f64()
        ),
    )
}

fn small_windows(lo: i64, hi: i64) -> Vec<SiteSet> {
    let sites: Vec<Site> = (lo..=hi).map(Site::d1).collect();
    let n = sites.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        if mask.count_ones() <= 3 {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).map(|i| sites[i]).collect());
        }
    }
    out
}

/// Window minimization agrees with the grid oracle on windows of ≤ 3 sites.
fn criterion_4() -> Outcome {
    const STEP: f64 = 1e-2;
    const HALF_WIDTH: f64 = 0.3;
    let models = [
        ("V=0", builtin::fk_periodic(1, None).unwrap()),
        ("eps=0.01", qp_spec(DEMO_EPSILON)),
    ];
    let opts = MinimizeOptions::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut boundary = 0;
    for (name, spec) in &models {
        for beta in [0.0, 0.41] {
            let u = LatticeConfiguration::linear(1, GOLDEN, beta);
            for w in small_windows(-2, 2) {
                let m = minimize_window(spec, &u, &w, &opts);
                let o = brute_force_oracle(spec, &u, &w, HALF_WIDTH, STEP);
                let (m, o) = match (m, o) {
                    (Ok(m), Ok(o)) => (m, o),
                    (Err(e), _) | (_, Err(e)) => return outcome(false, format!("{name}: {}", short(&e))),
                };
                if o.argmax.values().any(|v| v.abs() > HALF_WIDTH - STEP) {
                    boundary += 1;
                }
                worst = worst.max((m.gamma_star - o.gamma_max).abs());
                count += 1;
            }
        }
    }
    outcome(
        worst <= 1e-3 && boundary == 0,
        format!("{count} windows, max |gamma* - oracle| {worst:.2e}, oracle maxima on the grid edge: {boundary}"),
    )
}

struct Builtin {
    name: &'static str,
    spec: InteractionSpec,
    zero_potential: bool,
}

fn builtins() -> Vec<Builtin> {
    let b = |name, spec, zero_potential| Builtin {
        name,
        spec,
        zero_potential,
    };
    vec![
        b("fk-periodic d=1, V=0", builtin::fk_periodic(1, None).unwrap(), true),
        b("fk-periodic d=2, V=0", builtin::fk_periodic(2, None).unwrap(), true),
        b("fk-periodic d=1", builtin::fk_periodic(1, periodic(0.05)).unwrap(), false),
        b("fk-periodic d=2", builtin::fk_periodic(2, periodic(0.05)).unwrap(), false),
        b("fk-quasiperiodic", qp_spec(DEMO_EPSILON), false),
        b(
            "long-range-pair",
            builtin::long_range_pair(&builtin::geometric_coefficients(4), periodic(0.05)).unwrap(),
            false,
        ),
        b("three-body", builtin::three_body(0.5, periodic(0.05)).unwrap(), false),
        b("antiferromagnetic", builtin::antiferromagnetic().unwrap(), false),
        b("decoupled", builtin::decoupled().unwrap(), false),
        b("blocks", builtin::blocks(4).unwrap(), false),
    ]
}

fn random_config(rng: &mut ChaCha8Rng, dim: usize) -> LatticeConfiguration {
    let noise: Perturbation = cube(dim, -6, 6)
        .into_iter()
        .map(|s| (s, rng.random_range(-1.0..1.0)))
        .collect();
    LatticeConfiguration::linear(dim, rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)).with_perturbation(noise)
}

fn random_site(rng: &mut ChaCha8Rng, dim: usize, r: i64) -> Site {
    let c: Vec<i64> = (0..dim).map(|_| rng.random_range(-r..=r)).collect();
    Site::new(&c).unwrap()
}

fn bump(u: &LatticeConfiguration, s: Site, h: f64) -> LatticeConfiguration {
    u.perturbed(&[(s, h)].into_iter().collect())
}

/// Residual against central differences of the energy, Hessian entries
/// against central differences of the residual.
fn criterion_5() -> Outcome {
    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut grad_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    let mut per_model = Vec::new();
    for m in builtins() {
        let dim = m.spec.dim();
        let reach = m.spec.range_bound() as i64 - 1;
        for _ in 0..100 {
            let u = random_config(&mut rng, dim);
            let p = random_site(&mut rng, dim, 2);
            let only: SiteSet = [p].into_iter().collect();
            let energy = |v: &LatticeConfiguration| m.spec.window_energy(v, &only).unwrap();
            let fd = (energy(&bump(&u, p, H)) - energy(&bump(&u, p, -H))) / (2.0 * H);
            grad_err = grad_err.max((m.spec.residual(&u, &p).unwrap() - fd).abs());
            for q in cube(dim, -reach, reach).iter().map(|d| p.add(d)) {
                let fd = (m.spec.residual(&bump(&u, q, H), &p).unwrap() - m.spec.residual(&bump(&u, q, -H), &p).unwrap())
                    / (2.0 * H);
                hess_err = hess_err.max((m.spec.hessian_entry(&u, &p, &q).unwrap() - fd).abs());
            }
        }
        per_model.push(m.name);
    }
    outcome(
        grad_err <= 1e-6 && hess_err <= 1e-5,
        format!(
            "{} models x 100 configurations: gradient error {grad_err:.1e}, hessian error {hess_err:.1e}",
            per_model.len()
        ),
    )
}

/// Residual differences match the Hessian integral along the segment.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    let mut models = 0;
    for m in builtins() {
        let dim = m.spec.dim();
        for _ in 0..50 {
            let u = random_config(&mut rng, dim);
            let n = rng.random_range(1..=3);
            let eta: Perturbation = (0..n)
                .map(|_| (random_site(&mut rng, dim, 2), rng.random_range(-1.0..1.0)))
                .collect();
            let support: SiteSet = eta.keys().copied().collect();
            let near: Vec<Site> = widen(&support, m.spec.range_bound() - 1).into_iter().collect();
            let site = near[rng.random_range(0..near.len())];
            let d = match hilbert_identity_check(&m.spec, &u, &eta, &site, 16) {
                Ok(r) => r.discrepancy,
                Err(e) => return outcome(false, format!("{}: {}", m.name, short(&e))),
            };
            worst = worst.max(d);
            if m.zero_potential {
                worst_zero = worst_zero.max(d);
            }
        }
        models += 1;
    }
    outcome(
        worst < 1e-10 && worst_zero <= 1e-14,
        format!("{models} models x 50 scenarios: max discrepancy {worst:.1e}, V=0 max {worst_zero:.1e}"),
    )
}

fn contact_scenario(rng: &mut ChaCha8Rng, k: usize) -> (InteractionSpec, ContactScenario) {
    let (spec, dim) = match k % 3 {
        0 => (builtin::fk_periodic(1, None).unwrap(), 1),
        1 => (builtin::long_range_pair(&builtin::geometric_coefficients(3), None).unwrap(), 1),
        _ => (builtin::fk_periodic(2, None).unwrap(), 2),
    };
    let lo = rng.random_range(-5..=0);
    let len = if dim == 1 { rng.random_range(3..=8) } else { rng.random_range(2..=4) };
    let hi = lo + len - 1;
    let window = if dim == 1 { interval(lo, hi) } else { cube(2, lo, hi) };
    let sites: Vec<Site> = window.iter().copied().collect();
    let contact_site = sites[rng.random_range(0..sites.len())];
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let gap = spec.range_bound() as i64;
    let mut eta = Perturbation::new();
    for j in 0..rng.random_range(1..=3) {
        let c = if dim == 1 { vec![hi + gap + j] } else { vec![hi + gap + j, lo] };
        eta.insert(Site::new(&c).unwrap(), sign * rng.random_range(0.05..1.0));
    }
    let base = LatticeConfiguration::linear(dim, rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0));
    (
        spec,
        ContactScenario {
            base,
            eta,
            contact_site,
            window,
        },
    )
}

/// Single-signed touching scenarios: η = 0 on the window plus a strictly
/// larger frontier, never a counterexample.
fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut certified_total = 0;
    let mut counterexamples = 0;
    let mut other = Vec::new();
    for k in 0..20 {
        let (spec, sc) = contact_scenario(&mut rng, k);
        let r = scenario_graph(&spec, &sc).and_then(|g| contact_propagation(&spec, &g, &sc, SCENARIO_TOL, CONTACT_TOL));
        match r {
            Ok(r) => {
                let larger = r.certified.is_superset(&sc.window) && r.certified.len() > sc.window.len();
                let zero = r.certified.iter().all(|s| sc.eta.get(s).copied().unwrap_or(0.0) == 0.0);
                if larger && zero && !r.frontier.is_empty() {
                    certified_total += 1;
                } else {
                    other.push(format!("scenario {k}: frontier not strictly larger"));
                }
            }
            Err(Error::Counterexample { .. }) => counterexamples += 1,
            Err(e) => other.push(format!("scenario {k}: {}", short(&e))),
        }
    }
    outcome(
        certified_total == 20 && counterexamples == 0,
        format!(
            "{certified_total}/20 certified with a larger frontier, {counterexamples} counterexamples{}",
            if other.is_empty() { String::new() } else { format!("; {}", other.join("; ")) }
        ),
    )
}

fn oracle_gamma(u: &LatticeConfiguration) -> f64 {
    let spec = builtin::fk_periodic(1, periodic(DEMO_EPSILON)).unwrap();
    [interval(0, 0), interval(0, 1), interval(0, 2)]
        .iter()
        .map(|w| brute_force_oracle(&spec, u, w, 0.5, 1e-2).unwrap().gamma_max)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The antiferromagnetic demo exits with status 2; u ≡ 0 under
/// V = ε cos 2πx has a strictly positive Γ.
fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let code = fk_ground::cli::run([
        "fk-ground".as_ref(),
        "verify".as_ref(),
        "-c".as_ref(),
        configs().join("antiferro.toml").as_os_str(),
        "-o".as_ref(),
        dir.path().as_os_str(),
    ]);
    let zero = LatticeConfiguration::linear(1, 0.0, 0.0);
    let residual = builtin::fk_periodic(1, periodic(DEMO_EPSILON))
        .unwrap()
        .residual(&zero, &Site::d1(0))
        .unwrap();
    let gamma = oracle_gamma(&zero);
    outcome(
        code == 2 && gamma > 0.0,
        format!("antiferromagnetic exit {code}; u=0: residual {residual:.1e}, oracle max gamma {gamma:.2e}"),
    )
}

fn criterion_8_shifted() -> Outcome {
    let quarter = LatticeConfiguration::linear(1, 0.0, 0.25);
    let spec = builtin::fk_periodic(1, periodic(DEMO_EPSILON)).unwrap();
    let residual = spec.residual(&quarter, &Site::d1(0)).unwrap();
    let gamma = oracle_gamma(&quarter);
    outcome(
        gamma > 0.0 && residual.abs() > 0.0,
        format!("u=1/4: residual {residual:.3e}, oracle max gamma {gamma:.2e}"),
    )
}

/// `cmd_verify` with 1 and 8 threads writes byte-identical CSVs.
fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let model = configs().join("qp_subcritical.model.toml");
    std::fs::write(
        d.join("run.toml"),
        format!(
            "model = {:?}\noutput = \"hull\"\n[verify]\nhull = \"hull/hull.toml\"\n",
            model.to_str().unwrap()
        ),
    )
    .unwrap();
    let cfg = d.join("run.toml");
    let run = |args: &[&str]| {
        let mut v: Vec<std::ffi::OsString> = vec!["fk-ground".into()];
        v.extend(args.iter().map(|a| a.into()));
        fk_ground::cli::run(v)
    };
    let c = cfg.to_str().unwrap();
    if run(&["solve-hull", "-c", c]) != 0 {
        return outcome(false, "hull solve failed");
    }
    let (o1, o8) = (d.join("t1"), d.join("t8"));
    let r1 = run(&["verify", "-c", c, "-o", o1.to_str().unwrap(), "--threads", "1"]);
    let r8 = run(&["verify", "-c", c, "-o", o8.to_str().unwrap(), "--threads", "8"]);
    let mut same = r1 == r8;
    let mut notes = vec![format!("exit codes {r1}/{r8}")];
    for f in ["foliation.csv", "groundstate.csv"] {
        let (a, b) = (std::fs::read(o1.join(f)), std::fs::read(o8.join(f)));
        let eq = matches!((&a, &b), (Ok(a), Ok(b)) if a == b && !a.is_empty());
        same &= eq;
        notes.push(format!("{f} {}", if eq { "identical" } else { "differs" }));
    }
    outcome(same, notes.join(", "))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: Vec<(&str, Check)> = vec![
        ("1", criterion_1),
        ("2", || criterion_2(DEMO_EPSILON)),
        ("2*", || criterion_2(SUBCRITICAL_EPSILON)),
        ("3", || criterion_3(DEMO_EPSILON)),
        ("3*", || criterion_3(SUBCRITICAL_EPSILON)),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("8*", criterion_8_shifted),
        ("9", criterion_9),
    ];
    let mut failed = Vec::new();
    for (id, f) in criteria {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {id:<3} {} [{:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
