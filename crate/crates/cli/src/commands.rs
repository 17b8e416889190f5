use std::fs;
use std::path::{Path, PathBuf};

use cpr_core::certify::{Certificate, StrictVerdict};
use cpr_core::io;
use cpr_core::reconstruct::PSD_TOL;
use cpr_core::rng::{stream_rng, streams};
use cpr_core::{
    certify, cone_frame, conj_class_distance, Complex64, generic_cpr_size, measure, measure_clean, random_frame,
    reconstruct_altproj, reconstruct_linear, strict_report, witness_diag_m2, witness_diag_m3,
    witness_diag_m3_degenerate, witness_general, AltProjOptions, CertifyOptions, ComplexSignal, Frame,
    MeasurementVector, RealFrame, SearchOptions, StrictOptions, Verdict, WitnessPair,
};
use serde_json::{json, Value};

use crate::{
    CertifyArgs, CliError, Command, FalsifyArgs, GenArgs, MeasureArgs, MethodArg, Output, ReconstructArgs,
    StrictArgs, WitnessArgs,
};

type Res = Result<Output, CliError>;

/// A pair is confirmed when its measurements agree to this relative level...
const PAIR_GAP_TOL: f64 = 1e-9;
/// ...and the signals are at least this far apart relative to their size.
const PAIR_MIN_DISTANCE: f64 = 0.05;

pub fn run(command: &Command) -> Res {
    match command {
        Command::Gen(a) => gen(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Measure(a) => measure_cmd(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Falsify(a) => falsify(a),
        Command::Witness(a) => witness(a),
        Command::Strict(a) => strict(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

fn fmt_complex(z: Complex64) -> String {
    let (re, im) = (z.re, z.im);
    match (re == 0.0, im) {
        (_, 0.0) => format!("{re}"),
        (true, 1.0) => "i".into(),
        (true, -1.0) => "-i".into(),
        (true, _) => format!("{im}i"),
        (false, _) if im < 0.0 => format!("{re}-{}i", -im),
        (false, _) => format!("{re}+{im}i"),
    }
}

fn fmt_signal(x: &ComplexSignal) -> String {
    let parts: Vec<String> = x.entries().iter().map(|&z| fmt_complex(z)).collect();
    format!("({})", parts.join(", "))
}

/// Real frame for certification; complex frames are only accepted when
/// every imaginary part is zero.
fn load_real(path: &Path) -> Result<RealFrame, CliError> {
    match io::load_frame(path)? {
        Frame::Real(f) => Ok(f),
        Frame::Complex(c) => c.as_real().ok_or_else(|| {
            usage(format!(
                "{} is a complex frame; certification needs real vectors (try `cpr strict`)",
                show(path)
            ))
        }),
    }
}

fn witness_path(frame: &Path) -> PathBuf {
    frame.with_extension("witness.json")
}

struct PairCheck {
    gap: f64,
    distance: f64,
    confirmed: bool,
}

fn check_pair(frame: &RealFrame, w: &WitnessPair) -> Result<(PairCheck, MeasurementVector, MeasurementVector), CliError> {
    let bx = measure_clean(frame, &w.x)?;
    let by = measure_clean(frame, &w.y)?;
    let diff: f64 = bx.values.iter().zip(&by.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let gap = diff / bx.norm().max(f64::MIN_POSITIVE);
    let scale = w.x.norm_sqr().max(w.y.norm_sqr()).max(f64::MIN_POSITIVE);
    let distance = conj_class_distance(&w.x, &w.y)? / scale;
    let confirmed = gap <= PAIR_GAP_TOL && distance >= PAIR_MIN_DISTANCE;
    Ok((PairCheck { gap, distance, confirmed }, bx, by))
}

fn witness_text(w: &WitnessPair) -> String {
    format!(
        "x = {}\ny = {}\nresidual = {:e}\n",
        fmt_signal(&w.x),
        fmt_signal(&w.y),
        w.residual
    )
}

fn gen(a: &GenArgs) -> Res {
    if a.n < a.m {
        return Err(usage(format!("need n >= m, got m = {}, n = {}", a.m, a.n)));
    }
    let frame = if a.cone {
        if a.m != 3 {
            return Err(usage("cone frames live in dimension 3 (--m 3)"));
        }
        cone_frame(a.n, None)?
    } else {
        random_frame(a.m, a.n, a.seed)?
    };
    io::save_frame(&a.output, &Frame::Real(frame))?;
    let generic = if a.m >= 2 { Some(generic_cpr_size(a.m)?) } else { None };
    let below = generic.is_some_and(|g| a.n < g);
    let mut text = format!("wrote {}x{} frame to {}\n", a.m, a.n, show(&a.output));
    if let (true, Some(g)) = (below, generic) {
        text += &format!(
            "note: N = {} is below the generic size {g} for M = {}; expect NotCPR or Undecided\n",
            a.n, a.m
        );
    }
    Ok(Output {
        json: json!({
            "output": show(&a.output),
            "m": a.m,
            "n": a.n,
            "kind": if a.cone { "cone" } else { "gaussian" },
            "seed": if a.cone { Value::Null } else { json!(a.seed) },
            "generic_cpr_size": generic,
            "below_generic_size": below,
        }),
        text,
    })
}

fn certificate_text(cert: &Certificate, witness_file: Option<&str>) -> String {
    let mut text = format!("{} ({})\n", cert.verdict, cert.method);
    if let Some(d) = cert.det_value {
        text += &format!("det = {d}\n");
    }
    if let Some(k) = cert.kernel_dim {
        text += &format!("kernel_dim = {k}\n");
    }
    if let Some(set) = &cert.violating_set {
        text += &format!("violating set = {set:?}\n");
    }
    if let Some(t) = &cert.trials {
        text += &format!(
            "search: {} restarts, best objective {:e}\n",
            t.restarts_run, t.best_objective
        );
    }
    if let Some(path) = witness_file {
        text += &format!("witness written to {path}\n");
    }
    text
}

fn certify_cmd(a: &CertifyArgs) -> Res {
    let frame = load_real(&a.frame)?;
    let opts = CertifyOptions {
        kernel_tol: a.kernel_tol,
        det_tol: a.det_tol,
        search: a.budget.map(|budget| SearchOptions { budget, seed: a.seed, ..Default::default() }),
        ..Default::default()
    };
    let cert = certify(&frame, &opts)?;
    let witness_file = match (&cert.verdict, &cert.witness) {
        (Verdict::NotCPR, Some(w)) => {
            let path = witness_path(&a.frame);
            io::save_witness(&path, w)?;
            Some(show(&path))
        }
        _ => None,
    };
    if let Some(out) = &a.output {
        io::save_certificate(out, &cert, witness_file.as_deref())?;
    }
    Ok(Output {
        json: io::certificate_to_json(&cert, witness_file.as_deref())?,
        text: certificate_text(&cert, witness_file.as_deref()),
    })
}

fn is_pair_file(path: &Path) -> bool {
    fs::read_to_string(path)
        .ok()
        .and_then(|s| serde_json::from_str::<Value>(&s).ok())
        .is_some_and(|v| v.get("x").is_some() && v.get("y").is_some())
}

fn measure_cmd(a: &MeasureArgs) -> Res {
    let frame = load_real(&a.frame)?;
    if is_pair_file(&a.signal) {
        if a.noise_sigma.is_some() {
            return Err(usage("--noise-sigma applies to single signals, not witness pairs"));
        }
        let w = io::load_witness(&a.signal)?;
        let (check, bx, by) = check_pair(&frame, &w)?;
        if let Some(out) = &a.output {
            io::save_measurements(out, &bx)?;
        }
        let text = format!(
            "pair {}: relative gap {:e}, relative class distance {}\n",
            if check.confirmed { "confirmed" } else { "NOT confirmed" },
            check.gap,
            check.distance
        );
        return Ok(Output {
            json: json!({
                "x": io::measurements_to_json(&bx)?,
                "y": io::measurements_to_json(&by)?,
                "relative_gap": check.gap,
                "relative_distance": check.distance,
                "confirmed": check.confirmed,
                "output": a.output.as_deref().map(show),
            }),
            text,
        });
    }
    let x = io::load_signal(&a.signal)?;
    let b = match a.noise_sigma {
        Some(sigma) => {
            let mut rng = stream_rng(a.seed, streams::NOISE);
            measure(&frame, &x, Some((sigma, &mut rng)))?
        }
        None => measure_clean(&frame, &x)?,
    };
    let text = match &a.output {
        Some(out) => {
            io::save_measurements(out, &b)?;
            format!("wrote {} measurements to {}\n", b.n(), show(out))
        }
        None => b.values.iter().map(|v| format!("{v}\n")).collect(),
    };
    Ok(Output {
        json: json!({
            "measurements": io::measurements_to_json(&b)?,
            "output": a.output.as_deref().map(show),
        }),
        text,
    })
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Res {
    let frame = load_real(&a.frame)?;
    let b = io::load_measurements(&a.measurements)?;
    let (name, r) = match a.method {
        MethodArg::Linear => ("linear", reconstruct_linear(&frame, &b, a.tol.unwrap_or(PSD_TOL))?),
        MethodArg::Altproj => {
            let defaults = AltProjOptions::default();
            let opts = AltProjOptions {
                max_iter: a.max_iter,
                restarts: a.restarts,
                seed: a.seed,
                tol: a.tol.unwrap_or(defaults.tol),
                ..defaults
            };
            ("altproj", reconstruct_altproj(&frame, &b, &opts)?)
        }
    };
    if a.strict && !r.converged {
        return Err(CliError::Core(cpr_core::Error::NotConverged { residual: r.lift_residual }));
    }
    if let Some(out) = &a.output {
        io::save_signal(out, &r.estimate)?;
    }
    let text = format!(
        "estimate = {}\nlift_residual = {:e}\nrank_excess = {:e}\nconverged = {}\n",
        fmt_signal(&r.estimate),
        r.lift_residual,
        r.rank_excess,
        r.converged
    );
    Ok(Output {
        json: json!({
            "method": name,
            "estimate": io::signal_to_json(&r.estimate)?,
            "lift_residual": r.lift_residual,
            "rank_excess": r.rank_excess,
            "iterations": r.iterations,
            "converged": r.converged,
            "output": a.output.as_deref().map(show),
        }),
        text,
    })
}

fn falsify(a: &FalsifyArgs) -> Res {
    let frame = load_real(&a.frame)?;
    // M <= 3 is decided exactly; beyond that certify only searches when
    // the kernel test is inconclusive.
    let opts = CertifyOptions {
        search: Some(SearchOptions { budget: a.budget, seed: a.seed, ..Default::default() }),
        ..Default::default()
    };
    let cert = certify(&frame, &opts)?;
    let mut doc = json!({
        "verdict": cert.verdict.to_string(),
        "method": cert.method.to_string(),
        "witness": Value::Null,
        "confirmed": Value::Null,
        "restarts_run": cert.trials.as_ref().map(|t| t.restarts_run),
        "output": a.output.as_deref().map(show),
    });
    let text = match &cert.witness {
        Some(w) => {
            let (check, _, _) = check_pair(&frame, w)?;
            if let Some(out) = &a.output {
                io::save_witness(out, w)?;
            }
            doc["witness"] = io::witness_to_json(w)?;
            doc["confirmed"] = json!(check.confirmed);
            format!("witness ({})\n{}", cert.method, witness_text(w))
        }
        None if cert.verdict == Verdict::CertifiedCPR => {
            format!("no witness exists: the frame is CPR ({})\n", cert.method)
        }
        None => format!("no witness found in {} restarts\n", a.budget),
    };
    Ok(Output { json: doc, text })
}

fn witness(a: &WitnessArgs) -> Res {
    let t = &a.target;
    let w = if let Some(d) = &t.diag {
        match d[..] {
            [p, q, r] if q == 0.0 => witness_diag_m3_degenerate(p, r)?,
            [p, q, r] => witness_diag_m3(p, q, r)?,
            _ => return Err(usage("--diag takes three values a,b,c")),
        }
    } else if let Some(d) = &t.diag2 {
        match d[..] {
            [p, r] => witness_diag_m2(p, r)?,
            _ => return Err(usage("--diag2 takes two values a,c")),
        }
    } else if let Some(path) = &t.matrix {
        witness_general(&io::load_matrix(path)?)?
    } else {
        unreachable!("clap enforces one target")
    };
    if let Some(out) = &a.output {
        io::save_witness(out, &w)?;
    }
    Ok(Output {
        json: json!({ "witness": io::witness_to_json(&w)?, "output": a.output.as_deref().map(show) }),
        text: witness_text(&w),
    })
}

fn strict(a: &StrictArgs) -> Res {
    let (complex, real) = match io::load_frame(&a.frame)? {
        Frame::Real(f) => (f.to_complex(), Some(f)),
        Frame::Complex(c) => {
            let r = c.as_real();
            (c, r)
        }
    };
    let opts = StrictOptions { tol: a.tol, seed: a.seed, restarts: a.restarts, ..Default::default() };
    let mut report = strict_report(&complex, &opts)?;
    let cert = real.map(|f| certify(&f, &CertifyOptions::default())).transpose()?;
    if cert.as_ref().is_some_and(|c| c.verdict == Verdict::NotCPR) {
        report.verdict = StrictVerdict::NotCPR;
    }
    let mut text = format!("{:?}", report.verdict);
    if let Some(y) = &report.witness_y {
        text += &format!("; witness y = {}", fmt_signal(y));
    }
    text += &format!("\nIm-gram nullity = {}\n", report.im_gram_nullity);
    if let Some(c) = &cert {
        text += &format!("conjugate retrieval: {} ({})\n", c.verdict, c.method);
    }
    Ok(Output {
        json: json!({
            "verdict": format!("{:?}", report.verdict),
            "witness_y": report.witness_y.as_ref().map(io::signal_to_json).transpose()?,
            "im_gram_nullity": report.im_gram_nullity,
            "cpr_verdict": cert.as_ref().map(|c| c.verdict.to_string()),
            "cpr_method": cert.as_ref().map(|c| c.method.to_string()),
        }),
        text,
    })
}
