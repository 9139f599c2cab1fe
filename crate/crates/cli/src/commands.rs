use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use lapue::config::{builtin, load_instance};
use lapue::equilibrium::{solve, solve_operator, t_continuation, EquilibriumResult, SolverOptions};
use lapue::report::{read_result_csv, write_result_csv};
use lapue::robustness::{
    breakdown_sweep, default_outlier, default_tolerances, if_finite_difference_from, influence, shift_ratio_experiment,
    ShiftExperimentConfig,
};
use lapue::stochastics::{mean_scenario, sample_scenarios};
use lapue::{CapacityModel, Instance, PenaltyMode, SaaOperator, ScenarioSet};

use crate::{Cli, Command, Mode, SolveArgs, EXIT_CONFIG, EXIT_NOT_CONVERGED};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<u8, Failure>;

fn config_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: error.into(),
    }
}

fn runtime_err(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

pub fn run(cli: &Cli) -> Outcome {
    if cli.threads == 0 {
        return Err(config_err(anyhow!("--threads must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(runtime_err)?;
    let inst = load_network(&cli.network).map_err(config_err)?;
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))
        .map_err(config_err)?;
    match &cli.command {
        Command::Solve { mode, solve } => cmd_solve(cli, &inst, *mode, solve),
        Command::Shift {
            l,
            m,
            q,
            beta,
            arc,
            l_grid,
            grid_points,
            t,
            tol,
        } => {
            let inst = with_t(&inst, *t)?;
            let arc = arc_index(&inst, *arc)?;
            let perturbed = match &inst.capacity[arc] {
                CapacityModel::Normal { mu, sigma, floor_fraction } => CapacityModel::PerturbedTail {
                    mu: *mu,
                    sigma: *sigma,
                    q: *q,
                    beta: *beta,
                    floor_fraction: *floor_fraction,
                },
                other => return Err(config_err(anyhow!("shift needs a normal law on the target arc, found {other:?}"))),
            };
            let l_grid = if l_grid.is_empty() {
                let step = (*l / 10).max(1);
                let mut g: Vec<usize> = (1..).map(|k| k * step).take_while(|&x| x <= *l).collect();
                if g.last() != Some(l) {
                    g.push(*l);
                }
                g
            } else {
                l_grid.clone()
            };
            let cfg = ShiftExperimentConfig {
                l: *l,
                m: *m,
                l_grid,
                target_arc: arc,
                perturbed,
                seed: cli.seed,
                grid_points: *grid_points,
                opts: SolverOptions::default().with_tol(*tol),
            };
            cmd_shift(cli, &inst, &cfg)
        }
        Command::Influence {
            xi_tilde,
            arc,
            eps,
            solve,
        } => cmd_influence(cli, &inst, *xi_tilde, *arc, *eps, solve),
        Command::Breakdown { m, outlier, arc, solve } => cmd_breakdown(cli, &inst, m, *outlier, *arc, solve),
        Command::Continuation {
            t_list,
            samples,
            tol,
            max_iter,
        } => cmd_continuation(cli, &inst, t_list, *samples, *tol, *max_iter),
        Command::Validate { result } => cmd_validate(&inst, result.as_deref()),
    }
}

fn load_network(spec: &str) -> anyhow::Result<Instance> {
    match spec {
        "builtin:network1" => Ok(builtin::network1()),
        "builtin:nguyen-dupuis" => Ok(builtin::nguyen_dupuis()),
        path => load_instance(path).with_context(|| format!("loading network {path}")),
    }
}

fn with_t(inst: &Instance, t: Option<f64>) -> Result<Instance, Failure> {
    match t {
        Some(t) => inst.smoothed(t).map_err(config_err),
        None => Ok(inst.clone()),
    }
}

fn arc_index(inst: &Instance, id: u32) -> Result<usize, Failure> {
    inst.network
        .arc_position(id)
        .ok_or_else(|| config_err(anyhow!("unknown arc id {id}")))
}

fn options(tol: f64, max_iter: usize) -> Result<SolverOptions, Failure> {
    let opts = SolverOptions {
        tol,
        max_iter,
        ..SolverOptions::default()
    };
    opts.validate().map_err(config_err)?;
    Ok(opts)
}

fn scenarios(inst: &Instance, samples: usize, seed: u64) -> Result<ScenarioSet, Failure> {
    if samples == 0 {
        return Err(config_err(anyhow!("--samples must be at least 1")));
    }
    sample_scenarios(&inst.capacity, samples, seed).map_err(config_err)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, csv::Writer<BufWriter<File>>), Failure> {
    let path = dir.join(name);
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime_err)?;
    Ok((path, csv::Writer::from_writer(BufWriter::new(file))))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(runtime_err)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn status(converged: bool) -> u8 {
    if converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn fmt_vec(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_solve(cli: &Cli, inst: &Instance, mode: Mode, args: &SolveArgs) -> Outcome {
    let opts = options(args.tol, args.max_iter)?;
    let (problem, scen) = match mode {
        Mode::Ue => (inst.user_equilibrium(), mean_scenario(&inst.capacity).map_err(config_err)?),
        Mode::Lapue => (inst.max_penalty(), scenarios(inst, args.samples, cli.seed)?),
        Mode::Mlapue => (with_t(inst, args.t)?, scenarios(inst, args.samples, cli.seed)?),
    };
    let result = solve(&problem, &scen, &opts).map_err(runtime_err)?;
    let (tol_flow, tol_gap) = default_tolerances(&inst.network, &result);
    let path = cli.out.join("result.csv");
    let file = File::create(&path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime_err)?;
    write_result_csv(BufWriter::new(file), &inst.network, &result, cli.seed, tol_flow, tol_gap).map_err(runtime_err)?;
    println!("z_min = {}", fmt_vec(&result.z_min));
    println!(
        "residual = {:e} after {} iterations (converged: {})",
        result.residual, result.iterations, result.converged
    );
    eprintln!("wrote {}", path.display());
    Ok(status(result.converged))
}

fn cmd_shift(cli: &Cli, inst: &Instance, cfg: &ShiftExperimentConfig) -> Outcome {
    cfg.validate(inst).map_err(config_err)?;
    let out = shift_ratio_experiment(inst, cfg).map_err(runtime_err)?;
    let (path, mut w) = create(&cli.out, "shift_replications.csv")?;
    w.write_record(["replication", "seed", "v_base", "v_perturbed", "converged"])
        .map_err(runtime_err)?;
    for r in &out.replications {
        w.write_record([
            (r.index + 1).to_string(),
            r.seed.to_string(),
            r.v_base.to_string(),
            r.v_perturbed.to_string(),
            r.converged.to_string(),
        ])
        .map_err(runtime_err)?;
    }
    finish(w, &path)?;
    let (path, mut w) = create(&cli.out, "shift_summary.csv")?;
    w.write_record(["L", "delta1", "delta2", "ratio", "seed"]).map_err(runtime_err)?;
    for r in &out.ratios {
        w.write_record([
            r.l.to_string(),
            r.delta1.to_string(),
            out.delta2.to_string(),
            r.ratio.map(|x| x.to_string()).unwrap_or_default(),
            cfg.seed.to_string(),
        ])
        .map_err(runtime_err)?;
        match r.ratio {
            Some(x) => println!("L = {:>4}  delta1 = {:.6}  ratio = {:.6}", r.l, r.delta1, x),
            None => println!("L = {:>4}  delta1 = {:.6}  ratio undefined (delta2 = 0)", r.l, r.delta1),
        }
    }
    finish(w, &path)?;
    println!("delta2 = {:.6}", out.delta2);
    Ok(status(out.replications.iter().all(|r| r.converged)))
}

fn base_solve(
    inst: &Instance,
    args: &SolveArgs,
    seed: u64,
) -> Result<(Instance, ScenarioSet, SaaOperator, EquilibriumResult), Failure> {
    let opts = options(args.tol, args.max_iter)?;
    let problem = with_t(inst, args.t)?;
    let scen = scenarios(&problem, args.samples, seed)?;
    let op = SaaOperator::new(&problem, &scen).map_err(config_err)?;
    let base = solve_operator(&op, &problem.network.uniform_split(), &opts).map_err(runtime_err)?;
    Ok((problem, scen, op, base))
}

fn cmd_influence(cli: &Cli, inst: &Instance, xi_tilde: f64, arc_id: u32, eps: f64, args: &SolveArgs) -> Outcome {
    let arc = arc_index(inst, arc_id)?;
    if !(xi_tilde > 0.0) {
        return Err(config_err(anyhow!("--xi-tilde must be a positive capacity")));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(config_err(anyhow!("--eps must lie in (0, 0.5)")));
    }
    let opts = options(args.tol, args.max_iter)?;
    let (problem, scen, op, base) = base_solve(inst, args, cli.seed)?;
    if problem.penalty.mode == PenaltyMode::Max {
        return Err(config_err(anyhow!("influence needs the smoothed penalty")));
    }
    let mut outlier = scen.mean_row();
    outlier[arc] = xi_tilde;
    let gif = influence(&op, &base, &outlier, eps, &opts).map_err(runtime_err)?;
    let fd = if_finite_difference_from(&op, &base, &outlier, eps, &opts).map_err(runtime_err)?;
    let (path, mut w) = create(&cli.out, "influence.csv")?;
    w.write_record([
        "path_id",
        "od",
        "set",
        "direction",
        "finite_difference",
        "solved_by",
        "xi_tilde",
        "eps",
        "seed",
    ])
    .map_err(runtime_err)?;
    for (r, p) in problem.network.paths().iter().enumerate() {
        let set = if gif.sets.i_plus.contains(&r) {
            "plus"
        } else if gif.sets.i_minus.contains(&r) {
            "minus"
        } else {
            "zero"
        };
        w.write_record([
            (r + 1).to_string(),
            (p.od + 1).to_string(),
            set.to_string(),
            gif.direction[r].to_string(),
            fd.direction[r].to_string(),
            gif.solved_by.label().to_string(),
            xi_tilde.to_string(),
            eps.to_string(),
            cli.seed.to_string(),
        ])
        .map_err(runtime_err)?;
    }
    finish(w, &path)?;
    println!("direction = {}", fmt_vec(&gif.direction));
    println!("finite difference = {}", fmt_vec(&fd.direction));
    println!("z_min direction = {}", fmt_vec(&gif.multiplier_direction));
    Ok(status(base.converged && fd.mixed.converged))
}

fn parse_m_list(spec: &str) -> anyhow::Result<Vec<usize>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step): (usize, usize, usize) = (start.trim().parse()?, stop.trim().parse()?, step.trim().parse()?);
            if step == 0 || stop < start {
                return Err(anyhow!("range {spec} needs step > 0 and stop >= start"));
            }
            Ok((start..=stop).step_by(step).collect())
        }
        [_] => spec
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| anyhow!("bad count {s:?}: {e}")))
            .collect(),
        _ => Err(anyhow!("expected start:stop:step or a comma list, got {spec}")),
    }
}

fn cmd_breakdown(cli: &Cli, inst: &Instance, m: &str, outlier: Option<f64>, arc_id: u32, args: &SolveArgs) -> Outcome {
    let arc = arc_index(inst, arc_id)?;
    let m_list = parse_m_list(m).map_err(config_err)?;
    if let Some(&bad) = m_list.iter().find(|&&m| m > args.samples) {
        return Err(config_err(anyhow!("cannot contaminate {bad} of {} scenarios", args.samples)));
    }
    let opts = options(args.tol, args.max_iter)?;
    let problem = with_t(inst, args.t)?;
    let scen = scenarios(&problem, args.samples, cli.seed)?;
    let outlier = outlier.unwrap_or_else(|| default_outlier(&problem.capacity[arc]));
    if !(outlier > 0.0) {
        return Err(config_err(anyhow!("--outlier must be a positive capacity")));
    }
    let (_, rows) = breakdown_sweep(&problem, &scen, arc, &m_list, outlier, cli.seed, &opts).map_err(runtime_err)?;
    let net = &problem.network;
    let (path, mut w) = create(&cli.out, "breakdown.csv")?;
    let mut header: Vec<String> = ["m", "outlier", "deviation", "residual", "converged", "seed"]
        .map(String::from)
        .to_vec();
    header.extend((1..=net.num_paths()).map(|r| format!("f{r}")));
    header.extend((1..=net.num_od_pairs()).map(|k| format!("z{k}")));
    w.write_record(&header).map_err(runtime_err)?;
    for row in &rows {
        let mut rec = vec![
            row.m.to_string(),
            outlier.to_string(),
            row.deviation.to_string(),
            row.result.residual.to_string(),
            row.result.converged.to_string(),
            cli.seed.to_string(),
        ];
        rec.extend(row.result.f.iter().map(f64::to_string));
        rec.extend(row.result.z_min.iter().map(f64::to_string));
        w.write_record(&rec).map_err(runtime_err)?;
        println!("m = {:>4}  f = {}  z_min = {}", row.m, fmt_vec(&row.result.f), fmt_vec(&row.result.z_min));
    }
    finish(w, &path)?;
    Ok(status(rows.iter().all(|r| r.result.converged)))
}

fn cmd_continuation(cli: &Cli, inst: &Instance, t_list: &[f64], samples: usize, tol: f64, max_iter: usize) -> Outcome {
    let opts = options(tol, max_iter)?;
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) || t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config_err(anyhow!("--t needs strictly descending positive values")));
    }
    let scen = scenarios(inst, samples, cli.seed)?;
    let cont = t_continuation(inst, &scen, t_list, &opts).map_err(runtime_err)?;
    let (path, mut w) = create(&cli.out, "continuation.csv")?;
    w.write_record(["t", "distance", "residual", "iterations", "converged", "seed"])
        .map_err(runtime_err)?;
    for s in &cont.steps {
        w.write_record([
            s.t.to_string(),
            s.distance.to_string(),
            s.result.residual.to_string(),
            s.result.iterations.to_string(),
            s.result.converged.to_string(),
            cli.seed.to_string(),
        ])
        .map_err(runtime_err)?;
        println!("t = {:<8} distance = {:e}", s.t, s.distance);
    }
    finish(w, &path)?;
    let converged = cont.limit.converged && cont.steps.iter().all(|s| s.result.converged);
    Ok(status(converged))
}

fn cmd_validate(inst: &Instance, result: Option<&Path>) -> Outcome {
    let net = &inst.network;
    println!(
        "{}: {} nodes, {} arcs, {} OD pairs, {} paths",
        if inst.name.is_empty() { "network" } else { &inst.name },
        net.nodes().len(),
        net.num_arcs(),
        net.num_od_pairs(),
        net.num_paths()
    );
    if let Some(path) = result {
        let file = File::open(path)
            .with_context(|| format!("opening {}", path.display()))
            .map_err(config_err)?;
        let table = read_result_csv(file)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(config_err)?;
        if table.paths.len() != net.num_paths() || table.z_min.len() != net.num_od_pairs() {
            return Err(config_err(anyhow!(
                "result has {} paths and {} OD pairs; network has {} and {}",
                table.paths.len(),
                table.z_min.len(),
                net.num_paths(),
                net.num_od_pairs()
            )));
        }
        if let Some(p) = table.paths.iter().find(|p| p.od != net.paths()[p.path_id - 1].od + 1) {
            return Err(config_err(anyhow!("path {} is assigned to the wrong OD pair", p.path_id)));
        }
        let f: Vec<f64> = table.paths.iter().map(|p| p.flow).collect();
        println!(
            "result: residual {:e}, converged {}, demand violation {:e}",
            table.residual,
            table.converged,
            net.demand_violation(&f)
        );
    }
    Ok(0)
}
