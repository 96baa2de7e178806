//! Bundled and generated example data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::data::DataTable;
use crate::error::Result;
use crate::gmrf::Graph;
use crate::spec::{GraphSource, HyperSpec, ModelSpec, RandomComponent};

const SCOTLAND_CSV: &str = include_str!("../data/scotland.csv");
const SCOTLAND_GRAPH: &str = include_str!("../data/scotland.graph");

/// Lip cancer counts in 56 Scottish districts, 1975–1980: columns
/// `idarea`, `Y` (cases), `E` (expected cases) and `AFF` (share of the
/// workforce in agriculture, fishing and forestry).
pub fn scotland() -> DataTable {
    DataTable::read_csv(SCOTLAND_CSV.as_bytes()).expect("bundled data parses")
}

/// Adjacency of the 56 districts, with the three island districts joined to
/// their nearest mainland neighbour so that the graph is connected.
pub fn scotland_graph() -> Graph {
    Graph::parse(SCOTLAND_GRAPH).expect("bundled graph parses")
}

/// The graph file contents, in the format read by [`Graph::parse`].
pub fn scotland_graph_text() -> &'static str {
    SCOTLAND_GRAPH
}

/// Scaled BYM model with PC priors `P(σ > 1) = 0.01` on both precisions,
/// DIC, WAIC and stored configurations.
pub fn scotland_spec() -> ModelSpec {
    let g = scotland_graph();
    let lists = (0..g.n())
        .map(|i| g.neighbors(i).iter().map(|j| j + 1).collect())
        .collect();
    let mut c = RandomComponent::new("idarea", crate::gmrf::ModelKind::Bym);
    c.graph = Some(GraphSource::Inline(lists));
    c.scale_model = true;
    c.hyper
        .insert("theta1".into(), HyperSpec::prior("pc.prec", &[1.0, 0.01]));
    c.hyper
        .insert("theta2".into(), HyperSpec::prior("pc.prec", &[1.0, 0.01]));
    let mut spec = ModelSpec::new("Y", &["1", "AFF"]);
    spec.random.push(c);
    spec.family = crate::families::Family::Poisson;
    spec.e = Some(crate::spec::AuxSource::Column("E".into()));
    spec.control.compute.dic = true;
    spec.control.compute.waic = true;
    spec.control.compute.config = true;
    spec.control.compute.return_marginals = true;
    spec
}

/// Settings of a synthetic football league.
#[derive(Debug, Clone, Copy)]
pub struct League {
    pub teams: usize,
    pub intercept: f64,
    pub home: f64,
    pub attack_sd: f64,
    pub defense_sd: f64,
    /// Matches played, taken in schedule order; at most `teams·(teams−1)`.
    pub played: usize,
    pub seed: u64,
}

impl Default for League {
    /// A 20-team double round robin with effect sizes typical of a top
    /// division.
    fn default() -> Self {
        Self {
            teams: 20,
            intercept: 0.15,
            home: 0.237,
            attack_sd: 0.28,
            defense_sd: 0.21,
            played: 380,
            seed: 2019,
        }
    }
}

/// Simulated season: two rows per match (one per side) with columns
/// `goals`, `attack` (scoring team, 1-based), `defense` (conceding team) and
/// `home` (1 for the home side).
pub fn football(l: &League) -> Result<DataTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(l.seed);
    let att_d = Normal::new(0.0, l.attack_sd).expect("sd > 0");
    let def_d = Normal::new(0.0, l.defense_sd).expect("sd > 0");
    let att: Vec<f64> = (0..l.teams).map(|_| att_d.sample(&mut rng)).collect();
    let def: Vec<f64> = (0..l.teams).map(|_| def_d.sample(&mut rng)).collect();
    let (mut goals, mut a, mut d, mut h) = (vec![], vec![], vec![], vec![]);
    // round r pairs every team at home with the team r places after it, so
    // any prefix of the schedule is close to balanced
    let n = l.teams;
    let schedule = (1..n).flat_map(|r| (0..n).map(move |home| (home, (home + r) % n)));
    for (home, away) in schedule.take(l.played) {
        for (s, c, is_home) in [(home, away, 1.0), (away, home, 0.0)] {
            let mu = (l.intercept + l.home * is_home + att[s] + def[c]).exp();
            goals.push(Poisson::new(mu).expect("mu > 0").sample(&mut rng));
            a.push((s + 1) as f64);
            d.push((c + 1) as f64);
            h.push(is_home);
        }
    }
    DataTable::from_columns(vec![
        ("goals".into(), goals),
        ("attack".into(), a),
        ("defense".into(), d),
        ("home".into(), h),
    ])
}

/// Poisson GLMM with iid attack and defense effects and a home advantage.
pub fn football_spec() -> ModelSpec {
    let mut spec = ModelSpec::new("goals", &["1", "home"]);
    for id in ["attack", "defense"] {
        spec.random.push(
            RandomComponent::new(id, crate::gmrf::ModelKind::Iid).with_prior(
                "prec",
                "pc.prec",
                &[1.0, 0.01],
            ),
        );
    }
    spec.family = crate::families::Family::Poisson;
    spec
}
