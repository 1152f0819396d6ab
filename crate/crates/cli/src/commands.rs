use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use modex::analysis::{
    compare_models, dependence_report, fidelity, indicator_regions, occurrence_report, EffectConfig, FidelityReport,
    ModelEntry, Response,
};
use modex::cartpole::{self, CartPoleConfig};
use modex::extraction::{fit_cart_with, CartConfig, MaxFeatures};
use modex::ingest::{self, ColumnSchema, Dataset, Encoding, ResponseSchema, SchemaHints, SchemaManifest, SourceKind};
use modex::model::Model;
use modex::oracle::query_batch;
use modex::{
    extract_tree, fit_bic, fit_em, fit_forest, DiagonalGmm, EmConfig, Error, ExtractionConfig, FeatureKind,
    FeatureSpace, ForestConfig, Labels, Oracle, Task, WireConfig,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cli::*;
use crate::support::*;

/// Mixture-fitting settings; the `[gmm]` config section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct GmmSettings {
    kmax: usize,
    components: Option<usize>,
    #[serde(flatten)]
    em: EmConfig,
}

impl Default for GmmSettings {
    fn default() -> Self {
        GmmSettings {
            kmax: 10,
            components: None,
            em: EmConfig::default(),
        }
    }
}

/// The `[wire]` config section, in seconds.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct WireSettings {
    handshake_timeout: f64,
    batch_timeout: f64,
    probe_determinism: bool,
}

impl Default for WireSettings {
    fn default() -> Self {
        let d = WireConfig::default();
        WireSettings {
            handshake_timeout: d.handshake_timeout.as_secs_f64(),
            batch_timeout: d.batch_timeout.as_secs_f64(),
            probe_determinism: d.probe_determinism,
        }
    }
}

impl WireSettings {
    fn config(&self) -> Outcome<WireConfig> {
        let secs = |v: f64| {
            Duration::try_from_secs_f64(v).map_err(|_| Failure::Config(format!("bad timeout {v}")))
        };
        Ok(WireConfig {
            handshake_timeout: secs(self.handshake_timeout)?,
            batch_timeout: secs(self.batch_timeout)?,
            probe_determinism: self.probe_determinism,
        })
    }
}

pub fn run(cli: Cli) -> Outcome {
    let overrides = Overrides::load(cli.config.as_deref())?;
    let wire = overrides.apply("wire", WireSettings::default())?.config()?;
    let ctx = Context { overrides, wire };
    match cli.command {
        Command::Prepare(a) => prepare(&ctx, a),
        Command::FitGmm(a) => fit_gmm(&ctx, a),
        Command::TrainForest(a) => train_forest(&ctx, a),
        Command::TrainCart(a) => train_cart(&ctx, a),
        Command::Extract(a) => extract(&ctx, a),
        Command::Baseline(a) => baseline(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Analyze(a) => match a.report {
            AnalyzeCommand::Dependence(d) => dependence(&ctx, d),
            AnalyzeCommand::Occurrence(o) => occurrence(o),
            AnalyzeCommand::Compare(c) => compare(c),
        },
        Command::PolicyEval(a) => policy_eval(&ctx, a),
        Command::CartpoleData(a) => cartpole_data(&ctx, a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => serve(a),
    }
}

struct Context {
    overrides: Overrides,
    wire: WireConfig,
}

fn prepare(_: &Context, a: PrepareArgs) -> Outcome {
    let hints = match (&a.hints, &a.response) {
        (Some(p), _) => read_json::<SchemaHints>(p)?,
        (None, Some(r)) => SchemaHints {
            response: r.clone(),
            task: a.task.as_deref().map(str::parse).transpose()?,
            ..SchemaHints::default()
        },
        (None, None) => return Err(Failure::Usage("give --hints or --response".into())),
    };
    if !a.csv.exists() {
        return Err(Failure::Missing(a.csv.clone(), std::io::ErrorKind::NotFound.into()));
    }
    let (data, manifest) = ingest::load_csv(&a.csv, &hints)?;
    let response = manifest.response.name.clone();
    let write = |name: &str, d: &Dataset| -> Outcome {
        let path = a.out.join(name);
        create_dir(&a.out)?;
        ingest::write_encoded(&path, d, &response).map_err(Failure::Core)
    };
    match a.test_fraction {
        Some(f) => {
            let (train, test) = ingest::split(&data, f, a.seed)?;
            write("train.csv", &train)?;
            write("test.csv", &test)?;
            println!("{} rows: {} train, {} test", data.len(), train.len(), test.len());
        }
        None => {
            write("data.csv", &data)?;
            println!("{} rows", data.len());
        }
    }
    write_text(&a.out.join("manifest.json"), &manifest.to_json())?;
    println!("{} features, task {}", manifest.features.dim(), manifest.response.task);
    Ok(())
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Output(dir.to_path_buf(), e))
}

fn fit_mixture(overrides: &Overrides, x: &Array2<f64>, mut settings: GmmSettings) -> Outcome<(DiagonalGmm, GmmSettings, f64)> {
    settings = overrides.apply("gmm", settings)?;
    let (gmm, bic) = match settings.components {
        Some(k) => {
            let fit = fit_em(x.view(), k, &settings.em)?;
            (fit.gmm, fit.bic)
        }
        None => {
            let sel = fit_bic(x.view(), settings.kmax, &settings.em)?;
            for (k, b) in &sel.scores {
                eprintln!("K = {k:>2}  BIC = {b:.3}");
            }
            (sel.best.gmm, sel.best.bic)
        }
    };
    Ok((gmm, settings, bic))
}

fn fit_gmm(ctx: &Context, a: FitGmmArgs) -> Outcome {
    let (data, _) = load_dataset(&a.data.data, a.data.manifest.as_deref())?;
    let settings = GmmSettings {
        kmax: a.kmax,
        components: a.components,
        em: EmConfig {
            restarts: a.restarts,
            seed: a.seed,
            ..EmConfig::default()
        },
    };
    let (gmm, settings, bic) = fit_mixture(&ctx.overrides, &data.x, settings)?;
    let doc = gmm.to_document(data.space.names(), Some(settings.em), Some(bic));
    write_text(&a.out, &doc.to_json())?;
    println!("fitted K = {} components on {} rows (BIC {bic:.3})", gmm.components(), data.len());
    Ok(())
}

fn train_forest(ctx: &Context, a: TrainForestArgs) -> Outcome {
    let (data, _) = load_dataset(&a.data.data, a.data.manifest.as_deref())?;
    let cfg = ForestConfig {
        trees: a.trees,
        seed: a.seed,
        bootstrap: !a.no_bootstrap,
        max_features: if a.all_features { MaxFeatures::All } else { MaxFeatures::Sqrt },
    };
    let cfg = ctx.overrides.apply("forest", cfg)?;
    let forest = fit_forest(data.x.view(), &data.y, &data.space, &cfg)?;
    write_text(&a.out, &forest.to_json())?;
    let r = fidelity(&forest, &Model::Forest(forest.clone()), data.x.view(), Some(&data.y))?;
    println!(
        "forest of {} trees; training score {:.4}",
        forest.trees().len(),
        r.absolute.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cart_config(ctx: &Context, k: usize) -> Outcome<CartConfig> {
    ctx.overrides.apply("cart", CartConfig { k, ..CartConfig::default() })
}

fn train_cart(ctx: &Context, a: TrainCartArgs) -> Outcome {
    let (data, _) = load_dataset(&a.data.data, a.data.manifest.as_deref())?;
    let tree = fit_cart_with(data.x.view(), &data.y, &data.space, &cart_config(ctx, a.k)?)?;
    write_text(&a.out, &tree.to_json())?;
    println!("CART tree with {} nodes", tree.node_count());
    Ok(())
}

fn extract(ctx: &Context, a: ExtractArgs) -> Outcome {
    let cfg = ExtractionConfig {
        k: a.k,
        n: a.n,
        seed: a.seed,
        ..ExtractionConfig::default()
    };
    let cfg = ctx.overrides.apply("extract", cfg)?;
    let (gmm, space) = match (&a.gmm, &a.data) {
        (Some(g), _) => {
            let (gmm, names) = load_gmm(g)?;
            let space = match &a.manifest {
                Some(m) => {
                    let manifest = load_manifest(g, Some(m))?;
                    if manifest.features.names() != names {
                        return Err(Failure::Usage("mixture and manifest name different features".into()));
                    }
                    manifest.features
                }
                None if a.oracle.oracle_builtin.is_some() && names.iter().eq(cartpole::FEATURE_NAMES.iter()) => {
                    cartpole::feature_space()
                }
                None => FeatureSpace::numeric(&names)?,
            };
            (gmm, space)
        }
        (None, Some(d)) => {
            let (data, _) = load_dataset(d, a.manifest.as_deref())?;
            let settings = GmmSettings {
                em: EmConfig {
                    seed: a.seed,
                    ..EmConfig::default()
                },
                ..GmmSettings::default()
            };
            let (gmm, _, _) = fit_mixture(&ctx.overrides, &data.x, settings)?;
            (gmm, data.space)
        }
        (None, None) => return Err(Failure::Usage("give --gmm or --data for the input distribution".into())),
    };
    let oracle = open_oracle(&a.oracle, Some(space.dim()), ctx.wire.clone())?;
    let tree = extract_tree(oracle.as_ref(), &gmm, &space, &cfg)?;
    write_text(&a.out, &tree.to_json())?;
    if let Some(dot) = &a.dot {
        write_text(dot, &tree.to_dot())?;
    }
    println!("extracted {} nodes (budget {}, n = {})", tree.node_count(), cfg.budget(), cfg.n);
    for r in tree.rules() {
        println!("  {r}");
    }
    Ok(())
}

fn baseline(ctx: &Context, a: BaselineArgs) -> Outcome {
    let (data, _) = load_dataset(&a.data.data, a.data.manifest.as_deref())?;
    let oracle = open_oracle(&a.oracle, Some(data.space.dim()), ctx.wire.clone())?;
    let labels = query_batch(oracle.as_ref(), data.x.view())?;
    let tree = fit_cart_with(data.x.view(), &labels, &data.space, &cart_config(ctx, a.k)?)?;
    write_text(&a.out, &tree.to_json())?;
    println!("baseline tree with {} nodes", tree.node_count());
    Ok(())
}

fn evaluate(ctx: &Context, a: EvaluateArgs) -> Outcome {
    let (data, _) = load_dataset(&a.data.data, a.data.manifest.as_deref())?;
    let tree = load_tree(&a.tree)?;
    let oracle = open_oracle(&a.oracle, Some(data.space.dim()), ctx.wire.clone())?;
    let truth = (data.y.task() == oracle.task()).then_some(&data.y);
    let report = fidelity(&tree, oracle.as_ref(), data.x.view(), truth)?;
    write_json(&a.out, &report)?;
    print!("{}", report.render());
    Ok(())
}

fn dependence(ctx: &Context, a: DependenceArgs) -> Outcome {
    let tree = load_tree(&a.tree)?;
    let (gmm, _) = load_gmm(&a.gmm)?;
    let (data, manifest) = load_dataset(&a.data.data, a.data.manifest.as_deref())?;
    let feature = manifest.features.resolve(&a.feature)?;
    let regions = match (&a.low, &a.high) {
        (Some(l), Some(h)) => (parse_interval(l)?, parse_interval(h)?),
        _ if manifest.features.kinds()[feature] == FeatureKind::BinaryIndicator => indicator_regions(),
        _ => {
            return Err(Failure::Usage(format!(
                "'{}' is not a binary indicator; give --low and --high intervals",
                a.feature
            )))
        }
    };
    let oracle = open_oracle(&a.oracle, Some(data.space.dim()), ctx.wire.clone())?;
    let cfg = EffectConfig {
        n: a.n,
        seed: a.seed,
        response: a.effect_class.map(Response::ClassIndicator),
    };
    let cfg = ctx.overrides.apply("effect", cfg)?;
    let report = dependence_report(oracle.as_ref(), &gmm, &tree, feature, regions, data.x.view(), &cfg)?;
    write_json(&a.out, &report)?;
    print!("{}", report.render());
    Ok(())
}

fn occurrence(a: OccurrenceArgs) -> Outcome {
    let trees = a.trees.iter().map(|p| load_tree(p)).collect::<Outcome<Vec<_>>>()?;
    let space = FeatureSpace::numeric(trees[0].feature_names())?;
    let report = occurrence_report(&trees, space.resolve(&a.feature)?)?;
    write_json(&a.out, &report)?;
    print!("{}", report.render());
    Ok(())
}

fn tagged(spec: &str) -> Outcome<(String, PathBuf)> {
    spec.split_once('=')
        .map(|(t, p)| (t.to_string(), PathBuf::from(p)))
        .ok_or_else(|| Failure::Usage(format!("'{spec}' must look like tag=path")))
}

fn compare(a: CompareArgs) -> Outcome {
    let mut reports: BTreeMap<String, FidelityReport> = BTreeMap::new();
    for r in &a.reports {
        let (tag, path) = tagged(r)?;
        reports.insert(tag, read_json(&path)?);
    }
    let mut entries = Vec::new();
    for m in &a.models {
        let (tag, path) = tagged(m)?;
        let fidelity = reports.remove(&tag);
        entries.push(ModelEntry {
            tree: load_tree(&path)?,
            tag,
            fidelity,
        });
    }
    if let Some(tag) = reports.keys().next() {
        return Err(Failure::Usage(format!("report for unknown model '{tag}'")));
    }
    let table = compare_models(&entries)?;
    write_json(&a.out, &table)?;
    print!("{}", table.render());
    Ok(())
}

fn env_config(ctx: &Context, path: Option<&Path>) -> Outcome<CartPoleConfig> {
    let base = match path {
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
        None => CartPoleConfig::default(),
    };
    ctx.overrides.apply("cartpole", base)
}

fn policy_eval(ctx: &Context, a: PolicyEvalArgs) -> Outcome {
    let env = env_config(ctx, a.env_config.as_deref())?;
    let report = match &a.policy.tree {
        Some(p) => {
            let tree = load_tree(p)?;
            let policy = cartpole::tree_policy(&tree)?;
            cartpole::evaluate_policy(&policy, a.episodes, a.seed, &env)?
        }
        None => cartpole::evaluate_policy(&cartpole::expert, a.episodes, a.seed, &env)?,
    };
    write_json(&a.out, &report)?;
    print!("{}", report.render());
    Ok(())
}

fn cartpole_data(ctx: &Context, a: CartpoleDataArgs) -> Outcome {
    let env = env_config(ctx, a.env_config.as_deref())?;
    if a.episodes < 2 {
        return Err(Failure::Usage("need at least two episodes".into()));
    }
    let n_test = ((a.test_fraction * a.episodes as f64).round() as usize).clamp(1, a.episodes - 1);
    let n_train = a.episodes - n_test;
    let states = cartpole::rollout_states(&cartpole::expert, a.episodes, a.seed, &env)?;
    let train_rows = cartpole::rollout_states(&cartpole::expert, n_train, a.seed, &env)?.nrows();
    let labels = cartpole::ExpertOracle.predict_batch(states.view())?;
    let space = cartpole::feature_space();
    let all = Dataset {
        x: states,
        y: labels,
        space: space.clone(),
    };
    let train: Vec<usize> = (0..train_rows).collect();
    let test: Vec<usize> = (train_rows..all.len()).collect();
    let manifest = SchemaManifest {
        columns: cartpole::FEATURE_NAMES
            .iter()
            .map(|n| ColumnSchema {
                name: n.to_string(),
                source: SourceKind::Numeric,
                encoding: Encoding::Passthrough,
            })
            .collect(),
        response: ResponseSchema {
            name: "action".into(),
            task: Task::Classification,
            classes: Some(vec!["left".into(), "right".into()]),
        },
        features: space,
    };
    create_dir(&a.out)?;
    ingest::write_encoded(a.out.join("train.csv"), &all.select(&train), "action")?;
    ingest::write_encoded(a.out.join("test.csv"), &all.select(&test), "action")?;
    write_text(&a.out.join("manifest.json"), &manifest.to_json())?;
    println!(
        "{} states from {n_train} training episodes, {} from {n_test} test episodes",
        train.len(),
        test.len()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let table = match a.dataset {
        SynthKind::Wine => modex::synth::wine_like(a.seed),
        SynthKind::Leak => modex::synth::leaked_prognosis(a.seed),
        SynthKind::Student => modex::synth::student_grades(a.seed, a.male_shift),
    };
    write_text(&a.out, &table.to_csv())?;
    let mut hints = a.out.clone().into_os_string();
    hints.push(".hints.json");
    write_json(Path::new(&hints), &table.hints())?;
    println!("{} rows, {} columns", table.rows.len(), table.header.len());
    Ok(())
}

/// Distinct class labels a model can emit.
fn declared_labels(model: &Model) -> Vec<usize> {
    let trees: Vec<&modex::DecisionTree> = match model {
        Model::Tree(t) => vec![t],
        Model::Forest(f) => f.trees().iter().collect(),
    };
    let mut labels: Vec<usize> = trees
        .iter()
        .flat_map(|t| t.leaves().map(move |l| t.node(l).expect("leaf id")))
        .filter_map(|n| match n {
            modex::Node::Leaf {
                label: modex::Label::Class(c),
            } => Some(*c),
            _ => None,
        })
        .collect();
    labels.sort_unstable();
    labels.dedup();
    labels
}

#[derive(Deserialize)]
struct PredictRecord {
    #[serde(rename = "type")]
    kind: String,
    id: Option<u64>,
    #[serde(rename = "X")]
    x: Option<Vec<Vec<f64>>>,
}

fn serve(a: ServeArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let d = model.dimension();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let hello = match model.task() {
        Task::Classification => serde_json::json!({
            "type": "hello", "d": d, "task": "classification",
            "labels": declared_labels(&model), "concurrent": false
        }),
        Task::Regression => serde_json::json!({
            "type": "hello", "d": d, "task": "regression", "labels": null, "concurrent": false
        }),
    };
    let broken = |e: std::io::Error| Failure::Output(PathBuf::from("<stdout>"), e);
    writeln!(out, "{hello}").and_then(|_| out.flush()).map_err(broken)?;
    for line in std::io::stdin().lock().lines() {
        let line = line.map_err(|e| Failure::Missing(PathBuf::from("<stdin>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match answer(&model, d, &line) {
            Ok(r) => r,
            Err((id, message)) => serde_json::json!({"type": "error", "id": id, "message": message}),
        };
        writeln!(out, "{reply}").and_then(|_| out.flush()).map_err(broken)?;
    }
    Ok(())
}

fn answer(model: &Model, d: usize, line: &str) -> Result<serde_json::Value, (Option<u64>, String)> {
    let rec: PredictRecord = serde_json::from_str(line).map_err(|e| (None, format!("malformed record: {e}")))?;
    let id = rec.id;
    if rec.kind != "predict" {
        return Err((id, format!("unexpected record type '{}'", rec.kind)));
    }
    let (Some(id), Some(rows)) = (rec.id, rec.x) else {
        return Err((id, "predict needs id and X".into()));
    };
    if rows.iter().any(|r| r.len() != d) {
        return Err((Some(id), format!("rows must have {d} columns")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let x = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| (Some(id), e.to_string()))?;
    let y = query_batch(model, x.view()).map_err(|e: Error| (Some(id), e.to_string()))?;
    let y = match y {
        Labels::Classes(c) => serde_json::json!(c),
        Labels::Values(v) => serde_json::json!(v),
    };
    Ok(serde_json::json!({"type": "result", "id": id, "y": y}))
}
