//! Orchestration of the bottom-up workflow over a set of grids.
//!
//! Artifacts live under the output directory, one folder per grid:
//! `scenarios.json`, `stages/`, `for/`, `fpr.json`, `fpr.csv` and
//! `linear_model.json`; the study writes to `study/`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cep::{self, CepModel};
use crate::error::{Error, Result};
use crate::expansion::{self, ExpansionStage, ReinforceConfig};
use crate::for_engine::{self, ForPolygon, SweepConfig};
use crate::fpr_builder::{
    self, CapacityMetric, ChildSelection, Fpr, FprEntry, GridClass, LinearFprModel,
};
use crate::grid_model::{load_network, EquipmentCatalog, Network};
use crate::scenario_gen::{self, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildLink {
    pub grid: String,
    pub attach_bus: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub id: String,
    pub path: PathBuf,
    /// Overrides the top-level catalog for this grid.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub children: Vec<ChildLink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChildPolicy {
    /// Child stage whose scale factor is closest to the parent scenario's.
    #[default]
    ByScale,
    Largest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: PathBuf,
    /// DSO link id → grid whose linear model prices that link.
    #[serde(default)]
    pub links: BTreeMap<String, String>,
}

fn default_opex() -> f64 {
    0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Takes precedence over `scenarios.master_seed`.
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub grids: Vec<GridEntry>,
    #[serde(default)]
    pub scenarios: ScenarioConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub reinforce: ReinforceConfig,
    #[serde(default)]
    pub metric: CapacityMetric,
    #[serde(default = "default_opex")]
    pub opex_per_mwh: f64,
    #[serde(default)]
    pub child_selection: ChildPolicy,
    #[serde(default)]
    pub study: Option<StudyConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    /// Reads a config; relative paths are taken against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: PipelineConfig = read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        self.scenarios.check()?;
        self.sweep.check()?;
        if self.grids.is_empty() {
            return Err(Error::Invalid("config lists no grids".into()));
        }
        let mut seen = BTreeSet::new();
        for g in &self.grids {
            if !seen.insert(g.id.as_str()) {
                return Err(Error::Invalid(format!("grid `{}` listed twice", g.id)));
            }
        }
        self.grid_order().map(|_| ())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn grid(&self, id: &str) -> Result<&GridEntry> {
        self.grids
            .iter()
            .find(|g| g.id == id)
            .ok_or_else(|| Error::Invalid(format!("unknown grid `{id}`")))
    }

    /// Grids with every child ahead of its parent, otherwise in config order.
    pub fn grid_order(&self) -> Result<Vec<&GridEntry>> {
        fn visit<'a>(
            cfg: &'a PipelineConfig,
            g: &'a GridEntry,
            done: &mut BTreeSet<&'a str>,
            path: &mut Vec<&'a str>,
            out: &mut Vec<&'a GridEntry>,
        ) -> Result<()> {
            if done.contains(g.id.as_str()) {
                return Ok(());
            }
            if path.contains(&g.id.as_str()) {
                return Err(Error::Invalid(format!(
                    "grid hierarchy has a cycle through `{}`",
                    g.id
                )));
            }
            path.push(&g.id);
            for c in &g.children {
                visit(cfg, cfg.grid(&c.grid)?, done, path, out)?;
            }
            path.pop();
            done.insert(&g.id);
            out.push(g);
            Ok(())
        }
        let mut done = BTreeSet::new();
        let mut out = Vec::new();
        for g in &self.grids {
            visit(self, g, &mut done, &mut Vec::new(), &mut out)?;
        }
        Ok(out)
    }

    pub fn seed(&self) -> u64 {
        self.master_seed.unwrap_or(self.scenarios.master_seed)
    }

    /// Scenario settings of one grid, with a seed mixed from the grid id.
    pub fn scenario_config(&self, grid_id: &str) -> ScenarioConfig {
        let mut sc = self.scenarios.clone();
        sc.master_seed = scenario_gen::derive_seed(self.seed(), fnv1a(grid_id), u64::MAX);
        sc
    }

    pub fn catalog_for(&self, grid: &GridEntry) -> Result<EquipmentCatalog> {
        let path = grid
            .catalog
            .as_ref()
            .or(self.catalog.as_ref())
            .ok_or_else(|| {
                Error::Invalid(format!("no catalog configured for grid `{}`", grid.id))
            })?;
        EquipmentCatalog::load(self.resolve(path))
    }

    pub fn network(&self, grid: &GridEntry) -> Result<Network> {
        load_network(self.resolve(&grid.path), &self.catalog_for(grid)?)
    }

    pub fn layout(&self) -> Layout {
        Layout {
            root: self.resolve(&self.out_dir),
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// File locations inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn grid_dir(&self, grid: &str) -> PathBuf {
        self.root.join(grid)
    }
    pub fn scenarios(&self, grid: &str) -> PathBuf {
        self.grid_dir(grid).join("scenarios.json")
    }
    pub fn stages_dir(&self, grid: &str) -> PathBuf {
        self.grid_dir(grid).join("stages")
    }
    pub fn for_dir(&self, grid: &str) -> PathBuf {
        self.grid_dir(grid).join("for")
    }
    pub fn fpr(&self, grid: &str) -> PathBuf {
        self.grid_dir(grid).join("fpr.json")
    }
    pub fn fpr_csv(&self, grid: &str) -> PathBuf {
        self.grid_dir(grid).join("fpr.csv")
    }
    pub fn linear_model(&self, grid: &str) -> PathBuf {
        self.grid_dir(grid).join("linear_model.json")
    }
    pub fn study_dir(&self) -> PathBuf {
        self.root.join("study")
    }
}

fn stage_name(id: u64) -> String {
    format!("stage_{id:04}")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn reset_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// JSON files of a directory in name order.
fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::Unplannable { .. } | Error::Divergence(_) | Error::Infeasible(_)
    )
}

fn selection(policy: ChildPolicy, scale: f64) -> ChildSelection {
    match policy {
        ChildPolicy::ByScale => ChildSelection::ByScale(scale),
        ChildPolicy::Largest => ChildSelection::Largest,
    }
}

/// Loads the regions of all children of a grid from the output directory.
fn child_regions(cfg: &PipelineConfig, grid: &GridEntry) -> Result<Vec<(Fpr, String)>> {
    let layout = cfg.layout();
    grid.children
        .iter()
        .map(|c| {
            let path = layout.fpr(&c.grid);
            if !path.exists() {
                return Err(Error::Invalid(format!(
                    "region of child `{}` missing at {}; build it first",
                    c.grid,
                    path.display()
                )));
            }
            Ok((read_json::<Fpr>(&path)?, c.attach_bus.clone()))
        })
        .collect()
}

/// Draws scenarios for one grid and reinforces each of them.
pub fn variate(
    cfg: &PipelineConfig,
    grid: &GridEntry,
    skip_failed: bool,
) -> Result<Vec<ExpansionStage>> {
    let layout = cfg.layout();
    let net = cfg.network(grid)?;
    let catalog = cfg.catalog_for(grid)?;
    let children = child_regions(cfg, grid)?;
    let scenarios = scenario_gen::generate(&net, &cfg.scenario_config(&grid.id))?;
    write_file(
        &layout.scenarios(&grid.id),
        &scenario_gen::to_json(&scenarios)?,
    )?;
    log::info!(
        "grid {}: reinforcing {} scenarios",
        grid.id,
        scenarios.len()
    );

    let results: Vec<Result<ExpansionStage>> = scenarios
        .par_iter()
        .map(|s| {
            let mut n = scenario_gen::apply(&net, s)?;
            for (fpr, bus) in &children {
                n = fpr_builder::embed_child(
                    &n,
                    fpr,
                    bus,
                    selection(cfg.child_selection, s.scale_factor),
                )?;
            }
            expansion::reinforce_scenario(
                &n,
                &catalog,
                &cfg.reinforce,
                s.scenario_id,
                s.scale_factor,
            )
        })
        .collect();

    let dir = layout.stages_dir(&grid.id);
    reset_dir(&dir)?;
    let mut stages = Vec::new();
    for (s, r) in scenarios.iter().zip(results) {
        match r {
            Ok(stage) => {
                write_file(
                    &dir.join(format!("{}.json", stage_name(stage.scenario_id))),
                    &stage.to_json()?,
                )?;
                stages.push(stage);
            }
            Err(e) if skip_failed && recoverable(&e) => {
                log::warn!("grid {}: scenario {} skipped: {e}", grid.id, s.scenario_id);
            }
            Err(e) => {
                return Err(match e {
                    Error::Unplannable { reason, residual } => Error::Unplannable {
                        reason: format!("grid {} scenario {}: {reason}", grid.id, s.scenario_id),
                        residual,
                    },
                    other => other,
                })
            }
        }
    }
    if stages.is_empty() {
        return Err(Error::Unplannable {
            reason: format!("grid {}: no scenario could be planned", grid.id),
            residual: None,
        });
    }
    Ok(stages)
}

pub fn load_stages(cfg: &PipelineConfig, grid: &str) -> Result<Vec<ExpansionStage>> {
    let dir = cfg.layout().stages_dir(grid);
    if !dir.exists() {
        return Err(Error::Invalid(format!(
            "no stages for grid `{grid}` at {}",
            dir.display()
        )));
    }
    json_files(&dir)?.iter().map(|p| read_json(p)).collect()
}

/// Operating regions of every stored stage of one grid.
pub fn compute_fors(
    cfg: &PipelineConfig,
    grid: &GridEntry,
    skip_failed: bool,
) -> Result<Vec<(u64, ForPolygon)>> {
    let stages = load_stages(cfg, &grid.id)?;
    log::info!("grid {}: sweeping {} stages", grid.id, stages.len());
    let results: Vec<Result<ForPolygon>> = stages
        .par_iter()
        .map(|s| {
            let poly = for_engine::compute_for(&s.network, &cfg.sweep)?;
            for_engine::verify_certificates(&s.network, &poly)?;
            Ok(poly)
        })
        .collect();
    let dir = cfg.layout().for_dir(&grid.id);
    reset_dir(&dir)?;
    let mut out = Vec::new();
    for (s, r) in stages.iter().zip(results) {
        match r {
            Ok(poly) => {
                let name = stage_name(s.scenario_id);
                write_file(&dir.join(format!("{name}.json")), &poly.to_json()?)?;
                write_file(&dir.join(format!("{name}.csv")), &poly.to_csv())?;
                out.push((s.scenario_id, poly));
            }
            Err(e) if skip_failed && recoverable(&e) => {
                log::warn!(
                    "grid {}: stage {} has no region: {e}",
                    grid.id,
                    s.scenario_id
                );
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Assembles the planning region from stored stages and regions, then
/// linearizes it.
pub fn build_fpr(cfg: &PipelineConfig, grid: &GridEntry) -> Result<(Fpr, LinearFprModel)> {
    let layout = cfg.layout();
    let stages = load_stages(cfg, &grid.id)?;
    let for_dir = layout.for_dir(&grid.id);
    let mut entries = Vec::new();
    let mut class = None;
    for s in &stages {
        let path = for_dir.join(format!("{}.json", stage_name(s.scenario_id)));
        if !path.exists() {
            log::warn!(
                "grid {}: stage {} has no region file, left out",
                grid.id,
                s.scenario_id
            );
            continue;
        }
        class.get_or_insert_with(|| GridClass::of(&s.network));
        entries.push(FprEntry::from_stage(s, read_json(&path)?));
    }
    let class =
        class.ok_or_else(|| Error::Invalid(format!("no regions for grid `{}`", grid.id)))?;
    let fpr = fpr_builder::assemble(&grid.id, class, entries)?;
    write_file(&layout.fpr(&grid.id), &fpr.to_json()?)?;
    write_file(&layout.fpr_csv(&grid.id), &fpr.to_csv(cfg.metric))?;
    log::info!(
        "grid {}: region with {} entries",
        grid.id,
        fpr.entries.len()
    );
    let model = linearize(cfg, grid, &fpr)?;
    Ok((fpr, model))
}

fn linearize(cfg: &PipelineConfig, grid: &GridEntry, fpr: &Fpr) -> Result<LinearFprModel> {
    let model = fpr_builder::linearize(fpr, cfg.metric, cfg.opex_per_mwh)?;
    write_file(&cfg.layout().linear_model(&grid.id), &model.to_json()?)?;
    Ok(model)
}

/// Re-fits the linear model of a stored region.
pub fn relinearize(cfg: &PipelineConfig, grid: &GridEntry) -> Result<LinearFprModel> {
    let fpr: Fpr = read_json(&cfg.layout().fpr(&grid.id))?;
    linearize(cfg, grid, &fpr)
}

/// Base model of the study with linked links priced by stored linear models.
pub fn study_model(cfg: &PipelineConfig) -> Result<CepModel> {
    let study = cfg
        .study
        .as_ref()
        .ok_or_else(|| Error::Invalid("config has no study section".into()))?;
    let mut model = CepModel::load(cfg.resolve(&study.model))?;
    for (link, grid) in &study.links {
        let d = model
            .dso_links
            .iter_mut()
            .find(|d| &d.id == link)
            .ok_or_else(|| Error::Invalid(format!("study has no DSO link `{link}`")))?;
        d.fpr_model = Some(read_json(&cfg.layout().linear_model(grid))?);
    }
    Ok(model)
}

/// Solves scenarios A and B of a model and writes the comparison.
pub fn run_study(model: &CepModel, out: &Path, export_lp: bool) -> Result<cep::StudyReport> {
    let (a, b) = (cep::scenario_a(model), cep::scenario_b(model));
    if export_lp {
        for (tag, m) in [("a", &a), ("b", &b)] {
            let built = cep::build(m)?;
            write_file(
                &out.join(format!("scenario_{tag}.lp")),
                &built.lp.to_lp_text(),
            )?;
        }
    }
    let report = cep::run_study(&a, &b)?;
    write_file(&out.join("summary.csv"), &report.summary_csv())?;
    write_file(&out.join("technologies.csv"), &report.technology_csv())?;
    write_file(&out.join("scenario_a.csv"), &report.a.to_csv())?;
    write_file(&out.join("scenario_b.csv"), &report.b.to_csv())?;
    log::info!(
        "study {}: objective A {:.2}, B {:.2}",
        model.name,
        report.a.objective,
        report.b.objective
    );
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub skip_failed: bool,
    pub export_lp: bool,
}

/// Every grid bottom-up, then the study when one is configured.
pub fn run_pipeline(cfg: &PipelineConfig, opts: RunOptions) -> Result<()> {
    for grid in cfg.grid_order()? {
        log::info!("grid {}: start", grid.id);
        variate(cfg, grid, opts.skip_failed)?;
        compute_fors(cfg, grid, opts.skip_failed)?;
        build_fpr(cfg, grid)?;
        log::info!("grid {}: done", grid.id);
    }
    if cfg.study.is_some() {
        run_study(
            &study_model(cfg)?,
            &cfg.layout().study_dir(),
            opts.export_lp,
        )?;
    }
    Ok(())
}
