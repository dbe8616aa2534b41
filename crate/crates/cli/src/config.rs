//! Experiment configuration: a TOML document with `units`, `[model]`,
//! `[protocol]`, `[solver]`, optional `[sweep]` and one `[[output]]` table
//! per requested observable. All rates and frequencies are multiples of γ.

use std::fmt;

use floquet_core::models::{KerrModel, LambdaModel, Model, QubitModel, Waveform};
use floquet_core::observables::Channel;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum WaveformSpec {
    Constant(f64),
    /// `offset + amplitude cos(kΩt + phase)`; `offset_cosine` sets both to `value`.
    Cosine { offset: f64, amplitude: f64, phase: f64, harmonic: u32 },
}

impl WaveformSpec {
    pub fn is_constant(&self) -> bool {
        matches!(self, WaveformSpec::Constant(_))
    }

    pub fn waveform(&self, omega: f64) -> Waveform {
        match *self {
            WaveformSpec::Constant(v) => Waveform::constant(v),
            WaveformSpec::Cosine { offset, amplitude, phase, harmonic } => {
                Waveform { offset, amplitude, omega: omega * harmonic as f64, phase }
            }
        }
    }

    fn to_value(&self) -> Value {
        match *self {
            WaveformSpec::Constant(v) => Value::Float(v),
            WaveformSpec::Cosine { offset, amplitude, phase, harmonic } => {
                let mut t = Table::new();
                t.insert("shape".into(), Value::String("cosine".into()));
                t.insert("offset".into(), Value::Float(offset));
                t.insert("amplitude".into(), Value::Float(amplitude));
                t.insert("phase".into(), Value::Float(phase));
                t.insert("harmonic".into(), Value::Integer(harmonic as i64));
                Value::Table(t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Qubit { flux: f64, detuning: WaveformSpec, coupling: WaveformSpec, omega0: f64 },
    Lambda { flux: f64, delta1: f64, delta2: f64, drive: WaveformSpec, omega0: f64 },
    Kerr { flux: f64, interaction: f64, detuning: WaveformSpec },
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Qubit { .. } => "qubit",
            ModelConfig::Lambda { .. } => "lambda",
            ModelConfig::Kerr { .. } => "kerr",
        }
    }

    pub fn flux(&self) -> f64 {
        match *self {
            ModelConfig::Qubit { flux, .. } | ModelConfig::Lambda { flux, .. } | ModelConfig::Kerr { flux, .. } => flux,
        }
    }

    fn waveforms(&self) -> Vec<&WaveformSpec> {
        match self {
            ModelConfig::Qubit { detuning, coupling, .. } => vec![detuning, coupling],
            ModelConfig::Lambda { drive, .. } => vec![drive],
            ModelConfig::Kerr { detuning, .. } => vec![detuning],
        }
    }

    pub fn is_static(&self) -> bool {
        self.waveforms().iter().all(|w| w.is_constant())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid_points: usize,
    pub refine: bool,
    pub refine_tol: f64,
    pub max_grid_points: usize,
    pub rtol: f64,
    pub atol: f64,
    pub m_max: usize,
    pub oracle: bool,
    pub n_max: Truncation,
    pub workers: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_points: 512,
            refine: true,
            refine_tol: 1e-8,
            max_grid_points: 8192,
            rtol: 1e-10,
            atol: 1e-12,
            m_max: 40,
            oracle: false,
            n_max: Truncation::Auto,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayGrid {
    /// Largest delay, in units of 1/γ.
    pub tau_max: f64,
    pub tau_points: usize,
    pub tau_c_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputSpec {
    Reflection,
    Fluxes,
    Spectrum { channel: Channel, window: (f64, f64), samples: usize },
    G1 { channel: Channel, grid: DelayGrid },
    G2 { channel: Channel, grid: DelayGrid },
    Adiabatic,
    HighFrequency { order: usize },
    WeakPower,
    GammaMin { points: usize },
    Occupation,
    Hysteresis,
    State,
}

impl OutputSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OutputSpec::Reflection => "reflection",
            OutputSpec::Fluxes => "fluxes",
            OutputSpec::Spectrum { .. } => "spectrum",
            OutputSpec::G1 { .. } => "g1",
            OutputSpec::G2 { .. } => "g2",
            OutputSpec::Adiabatic => "adiabatic",
            OutputSpec::HighFrequency { .. } => "high_frequency",
            OutputSpec::WeakPower => "weak_power",
            OutputSpec::GammaMin { .. } => "gamma_min",
            OutputSpec::Occupation => "occupation",
            OutputSpec::Hysteresis => "hysteresis",
            OutputSpec::State => "state",
        }
    }

    fn supported_by(&self, model: &str) -> bool {
        match self {
            OutputSpec::Reflection | OutputSpec::Fluxes => model != "kerr",
            OutputSpec::Spectrum { .. } | OutputSpec::G1 { .. } | OutputSpec::G2 { .. } | OutputSpec::WeakPower => model == "qubit",
            OutputSpec::Occupation | OutputSpec::Hysteresis => model == "kerr",
            OutputSpec::Adiabatic | OutputSpec::HighFrequency { .. } | OutputSpec::GammaMin { .. } | OutputSpec::State => true,
        }
    }

    fn to_value(&self) -> Value {
        let mut t = Table::new();
        t.insert("kind".into(), Value::String(self.kind().into()));
        let grid = |t: &mut Table, g: &DelayGrid| {
            t.insert("tau_max".into(), Value::Float(g.tau_max));
            t.insert("tau_points".into(), Value::Integer(g.tau_points as i64));
            t.insert("tau_c_points".into(), Value::Integer(g.tau_c_points as i64));
        };
        match self {
            OutputSpec::Spectrum { channel, window, samples } => {
                t.insert("channel".into(), Value::String(channel.to_string()));
                t.insert("window".into(), Value::Array(vec![Value::Float(window.0), Value::Float(window.1)]));
                t.insert("samples".into(), Value::Integer(*samples as i64));
            }
            OutputSpec::G1 { channel, grid: g } | OutputSpec::G2 { channel, grid: g } => {
                t.insert("channel".into(), Value::String(channel.to_string()));
                grid(&mut t, g);
            }
            OutputSpec::HighFrequency { order } => {
                t.insert("order".into(), Value::Integer(*order as i64));
            }
            OutputSpec::GammaMin { points } => {
                t.insert("points".into(), Value::Integer(*points as i64));
            }
            _ => {}
        }
        Value::Table(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Dotted path into the document, e.g. `model.flux`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    /// Protocol frequency Ω.
    pub omega: f64,
    pub solver: SolverConfig,
    pub outputs: Vec<OutputSpec>,
    pub sweep: Option<SweepConfig>,
}

/// Every problem found in a document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn unknown(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(format!("{path}: unknown key `{k}`"));
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, key: &str, path: &str, required: bool) -> Option<&'a Table> {
        match t.get(key) {
            Some(Value::Table(x)) => Some(x),
            Some(_) => {
                self.err(format!("{path}{key}: expected a table"));
                None
            }
            None => {
                if required {
                    self.err(format!("{path}{key}: missing required section"));
                }
                None
            }
        }
    }

    fn number(&mut self, t: &Table, key: &str, path: &str) -> Option<Option<f64>> {
        match t.get(key) {
            None => Some(None),
            Some(Value::Float(x)) if x.is_finite() => Some(Some(*x)),
            Some(Value::Integer(i)) => Some(Some(*i as f64)),
            Some(_) => {
                self.err(format!("{path}.{key}: expected a finite number"));
                None
            }
        }
    }

    fn f64_req(&mut self, t: &Table, key: &str, path: &str) -> f64 {
        match self.number(t, key, path) {
            Some(Some(x)) => x,
            Some(None) => {
                self.err(format!("{path}.{key}: missing required field"));
                f64::NAN
            }
            None => f64::NAN,
        }
    }

    fn f64_or(&mut self, t: &Table, key: &str, path: &str, default: f64) -> f64 {
        self.number(t, key, path).map_or(f64::NAN, |x| x.unwrap_or(default))
    }

    fn usize_or(&mut self, t: &Table, key: &str, path: &str, default: usize) -> usize {
        match t.get(key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(_) => {
                self.err(format!("{path}.{key}: expected a non-negative integer"));
                default
            }
        }
    }

    fn bool_or(&mut self, t: &Table, key: &str, path: &str, default: bool) -> bool {
        match t.get(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(_) => {
                self.err(format!("{path}.{key}: expected true or false"));
                default
            }
        }
    }

    fn string<'a>(&mut self, t: &'a Table, key: &str, path: &str) -> Option<&'a str> {
        match t.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(format!("{path}.{key}: expected a string"));
                None
            }
            None => None,
        }
    }

    fn channel(&mut self, t: &Table, path: &str) -> Channel {
        match self.string(t, "channel", path) {
            None | Some("L") => Channel::L,
            Some("R") => Channel::R,
            Some(other) => {
                self.err(format!("{path}.channel: expected \"L\" or \"R\", got \"{other}\""));
                Channel::L
            }
        }
    }

    fn waveform(&mut self, t: &Table, key: &str, path: &str, required: bool) -> WaveformSpec {
        let full = format!("{path}.{key}");
        match t.get(key) {
            None => {
                if required {
                    self.err(format!("{full}: missing required field"));
                }
                WaveformSpec::Constant(0.0)
            }
            Some(Value::Float(x)) => WaveformSpec::Constant(*x),
            Some(Value::Integer(i)) => WaveformSpec::Constant(*i as f64),
            Some(Value::Table(w)) => {
                let shape = self.string(w, "shape", &full).unwrap_or("");
                match shape {
                    "constant" => {
                        self.unknown(w, &full, &["shape", "value"]);
                        WaveformSpec::Constant(self.f64_req(w, "value", &full))
                    }
                    "cosine" | "offset_cosine" => {
                        let offset_form = shape == "offset_cosine";
                        let (offset, amplitude) = if offset_form {
                            self.unknown(w, &full, &["shape", "value", "phase", "harmonic"]);
                            let v = self.f64_req(w, "value", &full);
                            (v, v)
                        } else {
                            self.unknown(w, &full, &["shape", "offset", "amplitude", "phase", "harmonic"]);
                            (self.f64_or(w, "offset", &full, 0.0), self.f64_req(w, "amplitude", &full))
                        };
                        let phase = self.f64_or(w, "phase", &full, 0.0);
                        let harmonic = match w.get("harmonic") {
                            None => 1,
                            Some(Value::Integer(k)) if *k >= 1 && *k <= u32::MAX as i64 => *k as u32,
                            Some(_) => {
                                self.err(format!("{full}.harmonic: waveform frequency must be a positive integer multiple of protocol.omega"));
                                1
                            }
                        };
                        WaveformSpec::Cosine { offset, amplitude, phase, harmonic }
                    }
                    other => {
                        self.err(format!("{full}.shape: expected \"constant\", \"cosine\" or \"offset_cosine\", got \"{other}\""));
                        WaveformSpec::Constant(0.0)
                    }
                }
            }
            Some(_) => {
                self.err(format!("{full}: expected a number or a waveform table"));
                WaveformSpec::Constant(0.0)
            }
        }
    }

    fn delay_grid(&mut self, t: &Table, path: &str) -> DelayGrid {
        let g = DelayGrid {
            tau_max: self.f64_or(t, "tau_max", path, 20.0),
            tau_points: self.usize_or(t, "tau_points", path, 201),
            tau_c_points: self.usize_or(t, "tau_c_points", path, 32),
        };
        if !(g.tau_max >= 0.0) {
            self.err(format!("{path}.tau_max: must be non-negative"));
        }
        if g.tau_points < 1 || g.tau_c_points < 1 {
            self.err(format!("{path}: tau_points and tau_c_points must be at least 1"));
        }
        g
    }

    fn output(&mut self, t: &Table, path: &str) -> Option<OutputSpec> {
        let kind = self.string(t, "kind", path);
        let out = match kind {
            Some("reflection") => OutputSpec::Reflection,
            Some("fluxes") => OutputSpec::Fluxes,
            Some("spectrum") => {
                self.unknown(t, path, &["kind", "channel", "window", "samples"]);
                let channel = self.channel(t, path);
                let window = match t.get("window") {
                    None => (-40.0, 40.0),
                    Some(Value::Array(a)) if a.len() == 2 => {
                        let num = |v: &Value| match v {
                            Value::Float(x) => Some(*x),
                            Value::Integer(i) => Some(*i as f64),
                            _ => None,
                        };
                        match (num(&a[0]), num(&a[1])) {
                            (Some(lo), Some(hi)) if lo < hi => (lo, hi),
                            _ => {
                                self.err(format!("{path}.window: expected [low, high] with low < high"));
                                (-40.0, 40.0)
                            }
                        }
                    }
                    Some(_) => {
                        self.err(format!("{path}.window: expected [low, high]"));
                        (-40.0, 40.0)
                    }
                };
                let samples = self.usize_or(t, "samples", path, 801);
                if samples < 2 {
                    self.err(format!("{path}.samples: at least 2 samples are required"));
                }
                return Some(OutputSpec::Spectrum { channel, window, samples });
            }
            Some("g1") | Some("g2") => {
                self.unknown(t, path, &["kind", "channel", "tau_max", "tau_points", "tau_c_points"]);
                let channel = self.channel(t, path);
                let grid = self.delay_grid(t, path);
                return Some(if kind == Some("g1") { OutputSpec::G1 { channel, grid } } else { OutputSpec::G2 { channel, grid } });
            }
            Some("adiabatic") => OutputSpec::Adiabatic,
            Some("high_frequency") => {
                self.unknown(t, path, &["kind", "order"]);
                return Some(OutputSpec::HighFrequency { order: self.usize_or(t, "order", path, 1) });
            }
            Some("weak_power") => OutputSpec::WeakPower,
            Some("gamma_min") => {
                self.unknown(t, path, &["kind", "points"]);
                let points = self.usize_or(t, "points", path, 64);
                if points < 1 {
                    self.err(format!("{path}.points: at least 1 point is required"));
                }
                return Some(OutputSpec::GammaMin { points });
            }
            Some("occupation") => OutputSpec::Occupation,
            Some("hysteresis") => OutputSpec::Hysteresis,
            Some("state") => OutputSpec::State,
            Some(other) => {
                self.err(format!("{path}.kind: unknown observable \"{other}\""));
                return None;
            }
            None => {
                self.err(format!("{path}.kind: missing required field"));
                return None;
            }
        };
        self.unknown(t, path, &["kind"]);
        Some(out)
    }
}

fn values_list(r: &mut Reader, v: Option<&Value>, path: &str) -> Vec<f64> {
    match v {
        Some(Value::Array(a)) => {
            let mut out = Vec::with_capacity(a.len());
            for x in a {
                match x {
                    Value::Float(f) if f.is_finite() => out.push(*f),
                    Value::Integer(i) => out.push(*i as f64),
                    _ => r.err(format!("{path}.values: entries must be finite numbers")),
                }
            }
            if out.is_empty() {
                r.err(format!("{path}.values: at least one value is required"));
            }
            out
        }
        Some(Value::Table(t)) => {
            r.unknown(t, &format!("{path}.values"), &["start", "stop", "count"]);
            let p = format!("{path}.values");
            let (a, b) = (r.f64_req(t, "start", &p), r.f64_req(t, "stop", &p));
            let n = r.usize_or(t, "count", &p, 0);
            if n < 1 {
                r.err(format!("{p}.count: at least one value is required"));
                return Vec::new();
            }
            linspace(a, b, n)
        }
        Some(_) => {
            r.err(format!("{path}.values: expected a list or {{ start, stop, count }}"));
            Vec::new()
        }
        None => {
            r.err(format!("{path}.values: missing required field"));
            Vec::new()
        }
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Parse `start:stop:count` or a comma-separated list.
pub fn parse_values(list: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = list.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| format!("bad range start `{}`", parts[0]))?;
        let b: f64 = parts[1].trim().parse().map_err(|_| format!("bad range stop `{}`", parts[1]))?;
        let n: usize = parts[2].trim().parse().map_err(|_| format!("bad range count `{}`", parts[2]))?;
        if n == 0 {
            return Err("range count must be positive".into());
        }
        return Ok(linspace(a, b, n));
    }
    list.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad value `{s}`"))).collect()
}

pub fn parse_document(text: &str) -> Result<Table, ConfigErrors> {
    text.parse::<Table>().map_err(|e| ConfigErrors(vec![format!("syntax: {e}")]))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    from_table(&parse_document(text)?)
}

pub fn from_table(doc: &Table) -> Result<ExperimentConfig, ConfigErrors> {
    let mut r = Reader { errors: Vec::new() };
    r.unknown(doc, "document", &["units", "model", "protocol", "solver", "sweep", "output"]);
    match doc.get("units") {
        Some(Value::String(u)) if u == "gamma" => {}
        Some(Value::String(u)) => r.err(format!("units: only \"gamma\" is supported, got \"{u}\"")),
        Some(_) => r.err("units: expected the string \"gamma\"".into()),
        None => r.err("units: missing required field (declare units = \"gamma\")".into()),
    }

    let model = match r.table(doc, "model", "", true) {
        Some(m) => {
            let p = "model";
            let flux = r.f64_req(m, "flux", p);
            if !(flux >= 0.0) && !flux.is_nan() {
                r.err("model.flux: must be non-negative".into());
            }
            match r.string(m, "kind", p) {
                Some("qubit") => {
                    r.unknown(m, p, &["kind", "flux", "detuning", "coupling", "omega0"]);
                    Some(ModelConfig::Qubit {
                        flux,
                        detuning: r.waveform(m, "detuning", p, false),
                        coupling: r.waveform(m, "coupling", p, true),
                        omega0: r.f64_or(m, "omega0", p, 0.0),
                    })
                }
                Some("lambda") => {
                    r.unknown(m, p, &["kind", "flux", "delta1", "delta2", "drive", "omega0"]);
                    Some(ModelConfig::Lambda {
                        flux,
                        delta1: r.f64_or(m, "delta1", p, 0.0),
                        delta2: r.f64_or(m, "delta2", p, 0.0),
                        drive: r.waveform(m, "drive", p, true),
                        omega0: r.f64_or(m, "omega0", p, 0.0),
                    })
                }
                Some("kerr") => {
                    r.unknown(m, p, &["kind", "flux", "interaction", "detuning"]);
                    Some(ModelConfig::Kerr {
                        flux,
                        interaction: r.f64_req(m, "interaction", p),
                        detuning: r.waveform(m, "detuning", p, true),
                    })
                }
                Some(other) => {
                    r.err(format!("model.kind: expected qubit, lambda or kerr, got \"{other}\""));
                    None
                }
                None => {
                    r.err("model.kind: missing required field".into());
                    None
                }
            }
        }
        None => None,
    };

    let omega = match r.table(doc, "protocol", "", false) {
        Some(p) => {
            r.unknown(p, "protocol", &["omega"]);
            let w = r.f64_req(p, "omega", "protocol");
            if !(w > 0.0) && !w.is_nan() {
                r.err("protocol.omega: frequencies must be positive".into());
            }
            w
        }
        None => {
            if model.as_ref().is_some_and(|m| !m.is_static()) {
                r.err("protocol: a modulated parameter needs protocol.omega".into());
            }
            1.0
        }
    };

    let mut solver = SolverConfig::default();
    if let Some(s) = r.table(doc, "solver", "", false) {
        let p = "solver";
        r.unknown(s, p, &["grid_points", "refine", "refine_tol", "max_grid_points", "rtol", "atol", "m_max", "oracle", "n_max", "workers"]);
        let d = SolverConfig::default();
        solver.grid_points = r.usize_or(s, "grid_points", p, d.grid_points);
        solver.refine = r.bool_or(s, "refine", p, d.refine);
        solver.refine_tol = r.f64_or(s, "refine_tol", p, d.refine_tol);
        solver.max_grid_points = r.usize_or(s, "max_grid_points", p, d.max_grid_points);
        solver.rtol = r.f64_or(s, "rtol", p, d.rtol);
        solver.atol = r.f64_or(s, "atol", p, d.atol);
        solver.m_max = r.usize_or(s, "m_max", p, d.m_max);
        solver.oracle = r.bool_or(s, "oracle", p, d.oracle);
        solver.workers = r.usize_or(s, "workers", p, d.workers);
        solver.n_max = match s.get("n_max") {
            None => Truncation::Auto,
            Some(Value::String(x)) if x == "auto" => Truncation::Auto,
            Some(Value::Integer(n)) if *n >= 2 => Truncation::Fixed(*n as usize),
            Some(_) => {
                r.err("solver.n_max: expected \"auto\" or an integer ≥ 2".into());
                Truncation::Auto
            }
        };
        if solver.grid_points < 8 {
            r.err("solver.grid_points: at least 8 grid points are required".into());
        }
        if solver.max_grid_points < solver.grid_points {
            r.err("solver.max_grid_points: must not be below grid_points".into());
        }
        if !(solver.rtol > 0.0 && solver.atol > 0.0 && solver.refine_tol > 0.0) {
            r.err("solver: tolerances must be positive".into());
        }
        if solver.workers < 1 {
            r.err("solver.workers: at least one worker is required".into());
        }
    }
    if model.as_ref().is_some_and(|m| m.kind() != "kerr") && matches!(solver.n_max, Truncation::Fixed(_)) {
        r.err("solver.n_max: only meaningful for the kerr model".into());
    }

    let sweep = r.table(doc, "sweep", "", false).map(|s| {
        r.unknown(s, "sweep", &["param", "values"]);
        let param = r.string(s, "param", "sweep").unwrap_or_default().to_string();
        if param.is_empty() {
            r.err("sweep.param: missing required field".into());
        } else if lookup(doc, &param).is_none() {
            r.err(format!("sweep.param: `{param}` does not exist in the configuration"));
        }
        SweepConfig { param, values: values_list(&mut r, s.get("values"), "sweep") }
    });

    let mut outputs = Vec::new();
    match doc.get("output") {
        Some(Value::Array(items)) => {
            for (k, item) in items.iter().enumerate() {
                let path = format!("output[{k}]");
                match item {
                    Value::Table(t) => {
                        if let Some(o) = r.output(t, &path) {
                            outputs.push(o);
                        }
                    }
                    _ => r.err(format!("{path}: expected a table")),
                }
            }
        }
        Some(_) => r.err("output: expected an array of tables ([[output]])".into()),
        None => r.err("output: at least one [[output]] is required".into()),
    }
    if let Some(m) = &model {
        for o in &outputs {
            if !o.supported_by(m.kind()) {
                r.err(format!("output `{}`: observable unsupported for model {}", o.kind(), m.kind()));
            }
        }
        if m.flux() == 0.0 && outputs.iter().any(|o| matches!(o, OutputSpec::Reflection)) {
            r.err("output `reflection`: amplitudes are undefined at zero flux".into());
        }
        if let ModelConfig::Qubit { coupling, .. } = m {
            if outputs.iter().any(|o| matches!(o, OutputSpec::WeakPower)) && coupling.is_constant() && m.is_static() {
                r.err("output `weak_power`: needs a modulated protocol".into());
            }
        }
    }
    let mut kinds: Vec<&str> = outputs.iter().map(|o| o.kind()).collect();
    kinds.sort_unstable();
    for w in kinds.windows(2) {
        if w[0] == w[1] {
            r.err(format!("output `{}`: requested more than once", w[0]));
        }
    }

    if r.errors.is_empty() {
        Ok(ExperimentConfig { model: model.expect("model parsed"), omega, solver, outputs, sweep })
    } else {
        Err(ConfigErrors(r.errors))
    }
}

/// Value at a dotted path.
pub fn lookup<'a>(doc: &'a Table, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let mut cur = doc.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

/// Replace the number at a dotted path; the path must already exist.
pub fn set_number(doc: &mut Table, path: &str, value: f64) -> Result<(), String> {
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().ok_or("empty parameter path")?;
    let mut cur = doc;
    for k in parents {
        cur = cur.get_mut(*k).and_then(Value::as_table_mut).ok_or_else(|| format!("`{path}` does not exist in the configuration"))?;
    }
    match cur.get(*last) {
        Some(Value::Float(_)) | Some(Value::Integer(_)) | Some(Value::Table(_)) => {
            cur.insert(last.to_string(), Value::Float(value));
            Ok(())
        }
        Some(_) => Err(format!("`{path}` is not numeric")),
        None => Err(format!("`{path}` does not exist in the configuration")),
    }
}

impl ExperimentConfig {
    pub fn to_table(&self) -> Table {
        let mut doc = Table::new();
        doc.insert("units".into(), Value::String("gamma".into()));
        let mut m = Table::new();
        m.insert("kind".into(), Value::String(self.model.kind().into()));
        m.insert("flux".into(), Value::Float(self.model.flux()));
        match &self.model {
            ModelConfig::Qubit { detuning, coupling, omega0, .. } => {
                m.insert("detuning".into(), detuning.to_value());
                m.insert("coupling".into(), coupling.to_value());
                m.insert("omega0".into(), Value::Float(*omega0));
            }
            ModelConfig::Lambda { delta1, delta2, drive, omega0, .. } => {
                m.insert("delta1".into(), Value::Float(*delta1));
                m.insert("delta2".into(), Value::Float(*delta2));
                m.insert("drive".into(), drive.to_value());
                m.insert("omega0".into(), Value::Float(*omega0));
            }
            ModelConfig::Kerr { interaction, detuning, .. } => {
                m.insert("interaction".into(), Value::Float(*interaction));
                m.insert("detuning".into(), detuning.to_value());
            }
        }
        doc.insert("model".into(), Value::Table(m));
        let mut p = Table::new();
        p.insert("omega".into(), Value::Float(self.omega));
        doc.insert("protocol".into(), Value::Table(p));
        let s = &self.solver;
        let mut st = Table::new();
        st.insert("grid_points".into(), Value::Integer(s.grid_points as i64));
        st.insert("refine".into(), Value::Boolean(s.refine));
        st.insert("refine_tol".into(), Value::Float(s.refine_tol));
        st.insert("max_grid_points".into(), Value::Integer(s.max_grid_points as i64));
        st.insert("rtol".into(), Value::Float(s.rtol));
        st.insert("atol".into(), Value::Float(s.atol));
        st.insert("m_max".into(), Value::Integer(s.m_max as i64));
        st.insert("oracle".into(), Value::Boolean(s.oracle));
        st.insert("workers".into(), Value::Integer(s.workers as i64));
        if self.model.kind() == "kerr" {
            st.insert(
                "n_max".into(),
                match s.n_max {
                    Truncation::Auto => Value::String("auto".into()),
                    Truncation::Fixed(n) => Value::Integer(n as i64),
                },
            );
        }
        doc.insert("solver".into(), Value::Table(st));
        if let Some(sw) = &self.sweep {
            let mut t = Table::new();
            t.insert("param".into(), Value::String(sw.param.clone()));
            t.insert("values".into(), Value::Array(sw.values.iter().map(|v| Value::Float(*v)).collect()));
            doc.insert("sweep".into(), Value::Table(t));
        }
        doc.insert("output".into(), Value::Array(self.outputs.iter().map(OutputSpec::to_value).collect()));
        doc
    }

    pub fn model(&self, n_max: usize) -> Model {
        let w = self.omega;
        match &self.model {
            ModelConfig::Qubit { flux, detuning, coupling, omega0 } => Model::Qubit(QubitModel {
                gamma0: 1.0,
                coupling: coupling.waveform(w),
                detuning: detuning.waveform(w),
                flux: *flux,
                omega: w,
                omega0: *omega0,
            }),
            ModelConfig::Lambda { flux, delta1, delta2, drive, omega0 } => Model::Lambda(LambdaModel {
                gamma: 1.0,
                drive: drive.waveform(w),
                delta1: *delta1,
                delta2: *delta2,
                flux: *flux,
                omega: w,
                omega0: *omega0,
            }),
            ModelConfig::Kerr { flux, interaction, detuning } => Model::Kerr(KerrModel {
                gamma: 1.0,
                u: *interaction,
                detuning: detuning.waveform(w),
                flux: *flux,
                n_max,
                omega: w,
            }),
        }
    }
}
