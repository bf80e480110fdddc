//! Mode dispatch and file emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kinetic_swarm::eps_dynamics::{integrate, EpsRunConfig};
use kinetic_swarm::init::generate;
use kinetic_swarm::io::{load_snapshot, write_phase_csv, write_sphere_csv, SnapshotDoc};
use kinetic_swarm::kernels::total_energy;
use kinetic_swarm::relaxation::{blowup_time, free_flow, root_asymptotics, solve_roots};
use kinetic_swarm::sphere::{integrate_limit, SphereRunConfig};
use kinetic_swarm::transport::{convergence_study, StudyConfig};
use kinetic_swarm::{moments, project_measure, w1, Ensemble, KernelSpec, PhaseEnsemble, SphereEnsemble, Vec3};

use crate::config::{Format, Mode, RunConfig};
use crate::error::CliError;
use crate::manifest::{config_hash, now, RunManifest};

/// Writes files under the output directory and remembers their names.
struct Emitter {
    root: PathBuf,
    files: Vec<String>,
}

impl Emitter {
    fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    fn create(&mut self, rel: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        self.files.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json<T: serde::Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut out = self.create(rel)?;
        serde_json::to_writer_pretty(&mut out, value)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    fn csv(&mut self, rel: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        Ok(csv::Writer::from_writer(self.create(rel)?))
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn moments_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "mass".into()];
    h.extend((1..=dim).map(|k| format!("momentum_{k}")));
    h.extend(["kinetic", "total_energy", "speed_min", "speed_max"].map(String::from));
    h
}

fn moments_row<E: Ensemble>(ens: &E, spec: &KernelSpec) -> Vec<String> {
    let m = moments(ens);
    let mut row = vec![num(ens.time()), num(m.mass)];
    row.extend(m.momentum.iter().take(ens.dim()).map(|&c| num(c)));
    row.extend([m.kinetic_energy, total_energy(ens, &spec.potential), m.speed_min, m.speed_max].map(num));
    row
}

/// Snapshot writer shared by both simulation modes.
fn write_snapshot<E: Ensemble>(
    em: &mut Emitter,
    cfg: &RunConfig,
    stem: &str,
    ens: &E,
    r: Option<f64>,
    csv_writer: impl Fn(&E, &mut BufWriter<File>) -> kinetic_swarm::Result<()>,
) -> Result<(), CliError> {
    for format in &cfg.output.formats {
        match format {
            Format::Csv => {
                let mut out = em.create(&format!("{stem}.csv"))?;
                csv_writer(ens, &mut out)?;
                out.flush()?;
            }
            Format::Json => em.json(&format!("{stem}.json"), &SnapshotDoc::from_ensemble(ens, r))?,
        }
    }
    Ok(())
}

fn initial_datum(cfg: &RunConfig) -> Result<PhaseEnsemble, CliError> {
    Ok(generate(&cfg.init_spec()?, cfg.params()?.r())?)
}

/// Streams an ensemble trajectory to disk; `advance` drives the integrator
/// and hands each recorded snapshot to the sink.
fn stream<E: Ensemble>(
    em: &mut Emitter,
    cfg: &RunConfig,
    spec: &KernelSpec,
    prefix: &str,
    n_steps: usize,
    r: Option<f64>,
    csv_writer: impl Fn(&E, &mut BufWriter<File>) -> kinetic_swarm::Result<()> + Copy,
    advance: impl FnOnce(&mut dyn FnMut(usize, &E)) -> kinetic_swarm::Result<()>,
) -> Result<(), CliError> {
    let stride = cfg.integrator()?.stride;
    let mut table: Option<csv::Writer<BufWriter<File>>> = None;
    let mut failure: Option<CliError> = None;
    let mut sink = |k: usize, ens: &E| {
        if failure.is_some() || !(k.is_multiple_of(stride) || k == n_steps) {
            return;
        }
        let result = (|| -> Result<(), CliError> {
            if table.is_none() {
                let mut w = em.csv("moments.csv")?;
                w.write_record(moments_header(ens.dim()))?;
                table = Some(w);
            }
            table.as_mut().expect("moments writer").write_record(moments_row(ens, spec))?;
            write_snapshot(em, cfg, &format!("snapshots/{prefix}_{k:07}"), ens, r, csv_writer)
        })();
        failure = result.err();
    };
    advance(&mut sink)?;
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(mut w) = table {
        w.flush()?;
    }
    Ok(())
}

fn simulate_eps(cfg: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let g = cfg.integrator()?;
    let spec = cfg.kernel_spec()?;
    let run_cfg = EpsRunConfig {
        snapshot_stride: g.stride,
        diffusion: g.diffusion,
        rng_seed: cfg.seed(),
        scheme: g.scheme,
        ..EpsRunConfig::new(cfg.params()?, spec, g.dt, g.horizon)
    };
    run_cfg.validate()?;
    let f_in = initial_datum(cfg)?;
    let csv_writer = |e: &PhaseEnsemble, out: &mut BufWriter<File>| write_phase_csv(e, out);
    stream(em, cfg, &spec, "eps", run_cfg.n_steps(), None, csv_writer, |sink| {
        integrate(&f_in, &run_cfg, sink).map(|_| ())
    })
}

fn simulate_limit(cfg: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let g = cfg.integrator()?;
    let spec = cfg.kernel_spec()?;
    let params = cfg.params()?;
    let run_cfg = SphereRunConfig {
        snapshot_stride: g.stride,
        diffusion: g.diffusion,
        rng_seed: cfg.seed(),
        ..SphereRunConfig::new(params, spec, g.dt, g.horizon)
    };
    run_cfg.validate()?;
    let f_in = project_measure(&initial_datum(cfg)?, params.r())?;
    let csv_writer = |e: &SphereEnsemble, out: &mut BufWriter<File>| write_sphere_csv(e, out);
    stream(em, cfg, &spec, "limit", run_cfg.n_steps(), Some(params.r()), csv_writer, |sink| {
        integrate_limit(&f_in, &run_cfg, sink).map(|_| ())
    })
}

fn compare(cfg: &RunConfig, em: &mut Emitter, base: &Path) -> Result<(), CliError> {
    let c = cfg.compare.as_ref().expect("validated");
    let load = |p: &str| -> Result<PhaseEnsemble, CliError> { Ok(load_snapshot(&base.join(p))?.to_phase()?) };
    let report = w1(&load(&c.left)?, &load(&c.right)?, cfg.seed())?;
    em.json("compare.json", &report)
}

fn sweep(cfg: &RunConfig, em: &mut Emitter, hash: &str) -> Result<(), CliError> {
    let s = cfg.sweep.as_ref().expect("validated");
    let g = cfg.integrator()?;
    let study = StudyConfig {
        params: cfg.params()?,
        spec: cfg.kernel_spec()?,
        dt: g.dt,
        scheme: g.scheme,
        diffusion: g.diffusion,
        seed: cfg.seed(),
    };
    let mut table = convergence_study(&initial_datum(cfg)?, &s.eps_list, &s.t_grid, &study)?;
    table.config_hash = hash.to_string();
    let mut w = em.csv("sweep.csv")?;
    w.write_record(["eps", "t", "w1", "n", "seed", "runtime_ms"])?;
    for row in &table.rows {
        w.write_record([num(row.eps), num(row.t), num(row.w1), table.n.to_string(), table.seed.to_string(), num(row.runtime_ms)])?;
    }
    w.flush()?;
    Ok(())
}

fn roots(cfg: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let s = cfg.roots.as_ref().expect("validated");
    let params = cfg.params()?;
    let r = params.r();
    let mut w = em.csv("roots.csv")?;
    w.write_record([
        "eps", "A", "rho1", "rho2", "rho3", "valid", "rho1_over_eps", "gap2_over_eps", "gap3_over_eps",
        "limit_rho1", "limit_gap2", "limit_gap3",
    ])?;
    for &a in &s.forcing {
        let (l1, l2, l3) = root_asymptotics(a, &params);
        for &eps in &s.eps_list {
            let t = solve_roots(eps, a, &params);
            w.write_record([
                num(eps),
                num(a),
                opt(t.rho1),
                opt(t.rho2),
                opt(t.rho3),
                t.valid.to_string(),
                opt(t.rho1.map(|x| x / eps)),
                opt(t.rho2.map(|x| (r - x) / eps)),
                opt(t.rho3.map(|x| (x - r) / eps)),
                num(l1),
                num(l2),
                num(l3),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn flow(cfg: &RunConfig, em: &mut Emitter) -> Result<(), CliError> {
    let s = cfg.flow.as_ref().expect("validated");
    let params = cfg.params()?;
    let dim = s.v.len();
    let mut v0 = Vec3::zeros();
    v0.as_mut_slice()[..dim].copy_from_slice(&s.v);
    let blowup = blowup_time(&v0, &params);
    let mut w = em.csv("flow.csv")?;
    let mut header = vec!["s".to_string()];
    header.extend((1..=dim).map(|k| format!("v{k}")));
    header.push("speed".into());
    w.write_record(&header)?;
    for &time in &s.s_grid {
        let v = free_flow(&v0, time, &params)?;
        let mut row = vec![num(time)];
        row.extend(v.iter().take(dim).map(|&c| num(c)));
        row.push(num(v.norm()));
        w.write_record(&row)?;
    }
    w.flush()?;
    em.json("flow_info.json", &serde_json::json!({ "blowup_time": if blowup.is_finite() { Some(blowup) } else { None } }))
}

fn project(cfg: &RunConfig, em: &mut Emitter, base: &Path) -> Result<(), CliError> {
    let p = cfg.project.as_ref().expect("validated");
    let r = cfg.params()?.r();
    let ens = load_snapshot(&base.join(&p.input))?.to_phase()?;
    let projected = project_measure(&ens, r)?;
    let csv_writer = |e: &SphereEnsemble, out: &mut BufWriter<File>| write_sphere_csv(e, out);
    write_snapshot(em, cfg, "projected", &projected, Some(r), csv_writer)
}

/// Executes one run. Relative input paths resolve against `base`; outputs
/// go to `cfg.output.directory` (also relative to `base`). The manifest is
/// written last as `manifest.json`.
pub fn run(cfg: &RunConfig, base: &Path) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let started_at = now();
    let hash = config_hash(cfg);
    let out_dir = base.join(&cfg.output.directory);
    let mut em = Emitter::new(&out_dir)?;
    match cfg.mode {
        Mode::SimulateEps => simulate_eps(cfg, &mut em)?,
        Mode::SimulateLimit => simulate_limit(cfg, &mut em)?,
        Mode::Compare => compare(cfg, &mut em, base)?,
        Mode::Sweep => sweep(cfg, &mut em, &hash)?,
        Mode::Roots => roots(cfg, &mut em)?,
        Mode::Flow => flow(cfg, &mut em)?,
        Mode::Project => project(cfg, &mut em, base)?,
    }
    let mut cfg_out = em.create("config.toml")?;
    cfg_out.write_all(cfg.to_toml().as_bytes())?;
    cfg_out.flush()?;
    let manifest = RunManifest {
        config_hash: hash,
        seed: cfg.seed(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now(),
        files: em.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(out_dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}
