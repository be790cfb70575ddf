use std::error::Error as StdError;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use npspectra::certify::{certify_with, CertifyOptions, Verdict};
use npspectra::geometry::{
    build_shape, concavity_scan, find_witness_center, gaussian_curvature_min, invert_shape,
    InversionConfig, Mesh, ShapeSpec,
};
use npspectra::inversion::{compare_spectra_under_inversion_2d, remove_mean, InversionSetup};
use npspectra::layerpot::{
    assemble_np_adjoint, assemble_single_layer, jump_residual_with, Density, JumpOptions,
};
use npspectra::spectral::{np_spectrum_of, plemelj_residual, SpectrumOptions};
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    CertifyArgs, Command, CurvatureArgs, DensityChoice, Format, Identity, InvertArgs, OutputArgs,
    ShapeArgs, SpectrumArgs, VerifyArgs,
};

type CliResult<T> = Result<T, Box<dyn StdError>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    CertifiedNegative = 2,
    NotApplicable = 3,
    Failed = 4,
}

pub fn run(command: Command) -> CliResult<Status> {
    match command {
        Command::Spectrum(args) => spectrum(args),
        Command::Invert(args) => invert(args),
        Command::Certify(args) => certify(args),
        Command::Verify(args) => verify(args),
        Command::Curvature(args) => curvature(args),
    }
}

fn load_spec(args: &ShapeArgs) -> CliResult<ShapeSpec> {
    let text = fs::read_to_string(&args.shape)
        .map_err(|e| format!("cannot read {}: {e}", args.shape.display()))?;
    let spec = ShapeSpec::from_json(&text)
        .map_err(|e| format!("{}: {e}", args.shape.display()))?;
    let spec = match args.refinement {
        Some(n) => spec.with_refinement(n),
        None => spec,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_point(text: &str, dimension: usize) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("malformed point {text:?}: {e}"))?;
    if values.len() != dimension {
        return Err(format!("point {text:?} needs {dimension} components").into());
    }
    Ok(values)
}

fn emit(output: &OutputArgs, text: &str) -> CliResult<()> {
    match &output.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()).into())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

// ------------------------------------------------------------------ spectrum

fn spectrum(args: SpectrumArgs) -> CliResult<Status> {
    let spec = load_spec(&args.shape)?;
    let mesh = build_shape(&spec)?;
    let opts = SpectrumOptions {
        count: args.count,
        vectors: args.vectors,
        ..SpectrumOptions::default()
    };
    let result = np_spectrum_of(&mesh, &opts)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => result.to_csv(),
        Format::Json => to_json(&json!({
            "mesh": mesh.id(),
            "dimension": mesh.dimension(),
            "refinement": mesh.refinement(),
            "nodes": mesh.len(),
            "eigenvalues": result.eigenvalues,
            "residuals": result.residuals,
            "symmetrization_residual": result.symmetrization_residual,
            "clusters": result.clusters(opts.cluster_tol),
        })),
    };
    if let Some(plot) = &args.plot {
        let mut data = String::from("# index eigenvalue\n");
        for (i, v) in result.eigenvalues.iter().enumerate() {
            writeln!(data, "{i} {}", num(*v))?;
        }
        write_file(plot, &data)?;
    }
    emit(&args.output, &text)?;
    Ok(Status::Success)
}

// -------------------------------------------------------------------- invert

fn node_csv(mesh: &Mesh) -> String {
    let d = mesh.dimension();
    let axes = ["x", "y", "z"];
    let mut out = String::from("index");
    for a in &axes[..d] {
        out.push_str(&format!(",{a}"));
    }
    for a in &axes[..d] {
        out.push_str(&format!(",n{a}"));
    }
    out.push_str(",weight\n");
    for i in 0..mesh.len() {
        let (x, n) = (mesh.node(i), mesh.normal(i));
        out.push_str(&i.to_string());
        for v in x[..d].iter().chain(&n[..d]) {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push(',');
        out.push_str(&num(mesh.weights()[i]));
        out.push('\n');
    }
    out
}

fn invert(args: InvertArgs) -> CliResult<Status> {
    let spec = load_spec(&args.shape)?;
    let mesh = build_shape(&spec)?;
    let center = parse_point(&args.center, mesh.dimension())?;
    let cfg = InversionConfig::new(&mesh, &center, args.radius)?;
    let image = invert_shape(&mesh, &cfg)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => node_csv(&image),
        Format::Json => to_json(&json!({
            "config": cfg,
            "original": mesh.id(),
            "image": image.id(),
            "nodes": image.len(),
            "boundary_measure": image.weights().iter().sum::<f64>(),
            "enclosed_measure": image.enclosed_measure(),
        })),
    };
    emit(&args.output, &text)?;
    Ok(Status::Success)
}

// ------------------------------------------------------------------- certify

fn certify(args: CertifyArgs) -> CliResult<Status> {
    if args.output.format == Some(Format::Csv) {
        return Err("certify writes JSON only".into());
    }
    let spec = load_spec(&args.shape)?;
    let mesh = build_shape(&spec)?;
    let center = match args.center.trim() {
        "auto" => None,
        text => Some(parse_point(text, mesh.dimension())?),
    };
    let opts = CertifyOptions {
        threshold: args.threshold,
        radius: args.radius,
        spectra: !args.no_spectra,
        ..CertifyOptions::default()
    };
    let cert = certify_with(&mesh, center.as_deref(), &opts)?;
    emit(&args.output, &to_json(&cert))?;
    Ok(match cert.verdict {
        Verdict::CertifiedNegative => Status::CertifiedNegative,
        Verdict::NotApplicable => Status::NotApplicable,
        Verdict::Inconclusive => Status::Failed,
    })
}

// -------------------------------------------------------------------- verify

struct Checked {
    residual: f64,
    json: Value,
    csv: String,
}

fn make_density(mesh: &Mesh, args: &VerifyArgs, seed: u64) -> CliResult<Density> {
    let phi = match args.density {
        DensityChoice::One => Density::constant(mesh, 1.0),
        DensityChoice::Random => Density::random_smooth(mesh, seed),
    };
    Ok(if args.mean_zero {
        remove_mean(mesh, &phi)?
    } else {
        phi
    })
}

fn sides_csv(lhs: &[f64], rhs: &[f64]) -> String {
    let mut out = String::from("index,lhs,rhs\n");
    for (i, (l, r)) in lhs.iter().zip(rhs).enumerate() {
        out.push_str(&format!("{i},{},{}\n", num(*l), num(*r)));
    }
    out
}

fn check_once(args: &VerifyArgs, mesh: &Mesh) -> CliResult<Checked> {
    let phi = make_density(mesh, args, args.seed)?;
    let center = || -> CliResult<InversionConfig> {
        let point = match &args.center {
            Some(text) => parse_point(text, mesh.dimension())?,
            None => vec![0.0; mesh.dimension()],
        };
        Ok(InversionConfig::new(mesh, &point, args.radius)?)
    };
    let scalar_csv = |name: &str, residual: f64| format!("identity,residual\n{name},{}\n", num(residual));
    match args.identity {
        Identity::Jump => {
            let rep = jump_residual_with(mesh, &phi, &JumpOptions::default())?;
            let residual = rep.res_plus.max(rep.res_minus);
            Ok(Checked {
                residual,
                json: json!({
                    "identity": "jump",
                    "res_plus": rep.res_plus,
                    "res_minus": rep.res_minus,
                    "residual": residual,
                    "step": rep.step,
                    "probed_nodes": rep.nodes.len(),
                    "refinement": mesh.refinement(),
                    "mesh": mesh.id(),
                }),
                csv: scalar_csv("jump", residual),
            })
        }
        Identity::Plemelj => {
            let s = assemble_single_layer(mesh)?;
            let k = assemble_np_adjoint(mesh)?;
            let residual = plemelj_residual(&s, &k)?;
            Ok(Checked {
                residual,
                json: json!({
                    "identity": "plemelj",
                    "residual": residual,
                    "refinement": mesh.refinement(),
                    "mesh": mesh.id(),
                }),
                csv: scalar_csv("plemelj", residual),
            })
        }
        Identity::Spectra2d => {
            let cmp = compare_spectra_under_inversion_2d(mesh, &center()?)?;
            let mut csv = String::from("index,original,image\n");
            for (i, (a, b)) in cmp.original.iter().zip(&cmp.image).enumerate() {
                csv.push_str(&format!("{i},{},{}\n", num(*a), num(*b)));
            }
            let mut json = serde_json::to_value(&cmp)?;
            json["identity"] = json!("spectra2d");
            json["residual"] = json!(cmp.distance);
            json["refinement"] = json!(mesh.refinement());
            Ok(Checked {
                residual: cmp.distance,
                json,
                csv,
            })
        }
        identity => {
            let setup = InversionSetup::new(mesh, &center()?)?;
            let report = match identity {
                Identity::SingleLayer => setup.single_layer(&phi)?,
                Identity::NpTransform => setup.np_transform(&phi)?,
                Identity::Energy => setup.energy(&phi)?,
                _ => {
                    let psi = make_density(mesh, args, args.seed.wrapping_add(1))?;
                    setup.conformal(&phi, &psi)?
                }
            };
            Ok(Checked {
                residual: report.residual,
                csv: sides_csv(&report.lhs, &report.rhs),
                json: serde_json::to_value(&report)?,
            })
        }
    }
}

fn verify(args: VerifyArgs) -> CliResult<Status> {
    let spec = load_spec(&args.shape)?;
    let tolerance = args.tolerance.unwrap_or(match (args.identity, spec.dimension) {
        (Identity::Spectra2d, _) => 1e-5,
        (_, 2) => 1e-6,
        _ => 2e-2,
    });
    let levels: Vec<usize> = match &args.ladder {
        Some(text) => text
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("malformed ladder {text:?}: {e}"))?,
        None => vec![spec.refinement],
    };
    if levels.is_empty() {
        return Err("empty refinement ladder".into());
    }

    let mut outputs = Vec::new();
    let mut csv = String::new();
    let mut plot = String::from("# refinement residual\n");
    let mut last = f64::NAN;
    for &level in &levels {
        let mesh = build_shape(&spec.clone().with_refinement(level))?;
        let mut checked = check_once(&args, &mesh)?;
        let passed = checked.residual <= tolerance;
        checked.json["tolerance"] = json!(tolerance);
        checked.json["passed"] = json!(passed);
        writeln!(plot, "{level} {}", num(checked.residual))?;
        if args.ladder.is_some() {
            csv.push_str(&format!("# refinement {level}\n"));
        }
        csv.push_str(&checked.csv);
        outputs.push(checked.json);
        last = checked.residual;
    }

    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Csv => csv,
        Format::Json if args.ladder.is_some() => to_json(&outputs),
        Format::Json => to_json(&outputs[0]),
    };
    if let Some(path) = &args.plot {
        write_file(path, &plot)?;
    }
    emit(&args.output, &text)?;
    Ok(if last <= tolerance {
        Status::Success
    } else {
        Status::Failed
    })
}

// ----------------------------------------------------------------- curvature

fn curvature(args: CurvatureArgs) -> CliResult<Status> {
    let spec = load_spec(&args.shape)?;
    let mesh = build_shape(&spec)?;
    if args.output.format == Some(Format::Csv) {
        let values = mesh
            .curvature()
            .ok_or("this mesh carries no curvature values")?;
        let label = if mesh.dimension() == 2 { "curvature" } else { "gaussian_curvature" };
        let mut text = format!("index,{label}\n");
        for (i, k) in values.iter().enumerate() {
            writeln!(text, "{i},{}", num(*k))?;
        }
        emit(&args.output, &text)?;
        return Ok(Status::Success);
    }

    let gaussian = match gaussian_curvature_min(&mesh) {
        Ok((value, node, point)) => json!({ "value": value, "node": node, "point": point }),
        Err(_) => Value::Null,
    };
    let (source, scan) = match args.center.as_deref().map(str::trim) {
        Some("auto") => match find_witness_center(&mesh) {
            Some((_, report)) => ("auto", serde_json::to_value(report)?),
            None => ("auto", Value::Null),
        },
        Some(text) => {
            let p = parse_point(text, mesh.dimension())?;
            ("given", serde_json::to_value(concavity_scan(&mesh, &p))?)
        }
        None => ("none", Value::Null),
    };
    let text = to_json(&json!({
        "mesh": mesh.id(),
        "refinement": mesh.refinement(),
        "gaussian_min": gaussian,
        "center_source": source,
        "concavity": scan,
    }));
    emit(&args.output, &text)?;
    Ok(Status::Success)
}
