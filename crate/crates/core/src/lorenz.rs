//! Lorenz trajectories: Euler generation, rescaling to [-0.5, 0.5], splitting
//! and windowing into one-step-ahead supervised datasets.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Number of points kept from a generated trajectory.
pub const SERIES_LEN: usize = 1500;
pub const N_TRAIN: usize = 1000;
pub const N_TEST: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzParams {
    pub sigma: f64,
    /// Rayleigh number (`r` in the usual notation).
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl LorenzParams {
    pub fn new(sigma: f64, rho: f64, beta: f64, dt: f64, n_steps: usize) -> Result<Self> {
        let p = Self {
            sigma,
            rho,
            beta,
            dt,
            n_steps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("sigma", self.sigma)?;
        positive("rho", self.rho)?;
        positive("beta", self.beta)?;
        positive("dt", self.dt)?;
        if self.n_steps == 0 {
            return Err(Error::InvalidParams("n_steps must be >= 1".into()));
        }
        Ok(())
    }

    /// The two symmetric non-trivial fixed points, defined for rho > 1.
    pub fn fixed_points(&self) -> Option<[LorenzState; 2]> {
        if self.rho <= 1.0 {
            return None;
        }
        let a = (self.beta * (self.rho - 1.0)).sqrt();
        let z = self.rho - 1.0;
        Some([LorenzState::new(a, a, z), LorenzState::new(-a, -a, z)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LorenzState {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// The two parameterizations used for the forecasting experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// sigma=5, r=20, b=2, init (0, 1, 1).
    A,
    /// sigma=10, r=28, b=8/3, init (0, 1, 1.05).
    B,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::A, Scenario::B];

    pub fn params(self) -> LorenzParams {
        match self {
            Scenario::A => LorenzParams {
                sigma: 5.0,
                rho: 20.0,
                beta: 2.0,
                dt: 0.01,
                n_steps: SERIES_LEN,
            },
            Scenario::B => LorenzParams {
                sigma: 10.0,
                rho: 28.0,
                beta: 8.0 / 3.0,
                dt: 0.01,
                n_steps: SERIES_LEN,
            },
        }
    }

    pub fn init(self) -> LorenzState {
        match self {
            Scenario::A => LorenzState::new(0.0, 1.0, 1.0),
            Scenario::B => LorenzState::new(0.0, 1.0, 1.05),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::A => "A",
            Scenario::B => "B",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Scenario::A),
            "b" => Ok(Scenario::B),
            other => Err(Error::InvalidConfig(format!(
                "unknown scenario '{other}' (expected A or B)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Series {
    X,
    Y,
    Z,
}

impl Series {
    pub const ALL: [Series; 3] = [Series::X, Series::Y, Series::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Series::X => "x",
            Series::Y => "y",
            Series::Z => "z",
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Series {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Series::X),
            "y" => Ok(Series::Y),
            "z" => Ok(Series::Z),
            other => Err(Error::InvalidConfig(format!("unknown series '{other}'"))),
        }
    }
}

/// Affine map taking `[min, max]` onto `[-0.5, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTransform {
    pub offset: f64,
    pub gain: f64,
}

impl ScaleTransform {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData {
                needed: 1,
                available: 0,
            });
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if max <= min {
            return Err(Error::DegenerateSeries { value: min });
        }
        Ok(Self {
            offset: min,
            gain: 1.0 / (max - min),
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) * self.gain - 0.5
    }

    pub fn invert(&self, s: f64) -> f64 {
        (s + 0.5) / self.gain + self.offset
    }
}

/// Rescale a series to [-0.5, 0.5], returning the fitted transform.
pub fn rescale(series: &[f64]) -> Result<(Vec<f64>, ScaleTransform)> {
    let t = ScaleTransform::fit(series)?;
    let scaled = series
        .iter()
        .map(|&v| t.apply(v).clamp(-0.5, 0.5))
        .collect();
    Ok((scaled, t))
}

/// Three aligned series. `scale` is set once the values have been rescaled.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub scale: Option<[ScaleTransform; 3]>,
}

impl SeriesSet {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(Error::ShapeMismatch(format!(
                "series lengths differ: {} / {} / {}",
                x.len(),
                y.len(),
                z.len()
            )));
        }
        Ok(Self {
            x,
            y,
            z,
            scale: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn get(&self, s: Series) -> &[f64] {
        match s {
            Series::X => &self.x,
            Series::Y => &self.y,
            Series::Z => &self.z,
        }
    }

    pub fn state(&self, t: usize) -> LorenzState {
        LorenzState::new(self.x[t], self.y[t], self.z[t])
    }

    pub fn truncate(&mut self, len: usize) {
        self.x.truncate(len);
        self.y.truncate(len);
        self.z.truncate(len);
    }

    /// Rescale each series independently to [-0.5, 0.5].
    pub fn rescaled(&self) -> Result<SeriesSet> {
        let (x, tx) = rescale(&self.x)?;
        let (y, ty) = rescale(&self.y)?;
        let (z, tz) = rescale(&self.z)?;
        Ok(SeriesSet {
            x,
            y,
            z,
            scale: Some([tx, ty, tz]),
        })
    }

    /// Undo the scaling. Returns a clone when the set is unscaled.
    pub fn unscaled(&self) -> SeriesSet {
        match &self.scale {
            None => self.clone(),
            Some(ts) => {
                let inv = |v: &[f64], t: &ScaleTransform| v.iter().map(|&s| t.invert(s)).collect();
                SeriesSet {
                    x: inv(&self.x, &ts[0]),
                    y: inv(&self.y, &ts[1]),
                    z: inv(&self.z, &ts[2]),
                    scale: None,
                }
            }
        }
    }

    fn slice(&self, range: Range<usize>) -> SeriesSet {
        SeriesSet {
            x: self.x[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            z: self.z[range].to_vec(),
            scale: self.scale,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,z")?;
        for t in 0..self.len() {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                t, self.x[t], self.y[t], self.z[t]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, path: &Path) -> Result<SeriesSet> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = r.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == "t,x,y,z" => {}
            Some((_, Ok(h))) => return Err(parse_err(1, format!("bad header '{h}'"))),
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => return Err(parse_err(1, "empty file".into())),
        }
        let (mut x, mut y, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(parse_err(
                    i + 1,
                    format!("expected 4 columns, got {}", cols.len()),
                ));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(i + 1, e.to_string()))
            };
            x.push(num(cols[1])?);
            y.push(num(cols[2])?);
            z.push(num(cols[3])?);
        }
        SeriesSet::new(x, y, z)
    }
}

pub fn lorenz_derivative(s: LorenzState, p: &LorenzParams) -> LorenzState {
    LorenzState {
        x: p.sigma * (s.y - s.x),
        y: p.rho * s.x - s.y - s.x * s.z,
        z: s.x * s.y - p.beta * s.z,
    }
}

/// Explicit Euler integration; returns `n_steps + 1` points starting at `init`.
pub fn euler_integrate(init: LorenzState, params: &LorenzParams) -> Result<SeriesSet> {
    params.validate()?;
    integrate_steps(init, params, params.n_steps)
}

fn integrate_steps(init: LorenzState, params: &LorenzParams, n_steps: usize) -> Result<SeriesSet> {
    if !init.is_finite() {
        return Err(Error::NonFinite { step: 0 });
    }
    let n = n_steps + 1;
    let (mut x, mut y, mut z) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut s = init;
    x.push(s.x);
    y.push(s.y);
    z.push(s.z);
    for step in 1..n {
        let d = lorenz_derivative(s, params);
        s = LorenzState {
            x: s.x + params.dt * d.x,
            y: s.y + params.dt * d.y,
            z: s.z + params.dt * d.z,
        };
        if !s.is_finite() {
            return Err(Error::NonFinite { step });
        }
        x.push(s.x);
        y.push(s.y);
        z.push(s.z);
    }
    SeriesSet::new(x, y, z)
}

/// Integrate a scenario, keep the first `n_steps` points and return them unscaled.
pub fn generate_raw(scenario: Scenario) -> Result<SeriesSet> {
    let params = scenario.params();
    let mut set = euler_integrate(scenario.init(), &params)?;
    set.truncate(params.n_steps);
    Ok(set)
}

/// Integrate a scenario and rescale each series over the full generated span.
pub fn generate_scaled(scenario: Scenario) -> Result<SeriesSet> {
    generate_raw(scenario)?.rescaled()
}

/// Contiguous split: train is `[0, n_train)`, test is `[n_train, n_train + n_test)`.
pub fn split_train_test(
    set: &SeriesSet,
    n_train: usize,
    n_test: usize,
) -> Result<(SeriesSet, SeriesSet)> {
    let needed = n_train + n_test;
    if needed > set.len() {
        return Err(Error::InsufficientData {
            needed,
            available: set.len(),
        });
    }
    Ok((set.slice(0..n_train), set.slice(n_train..needed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// examples x channels x width
    Conv,
    /// width (sequence) x examples x features
    Recurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub window: usize,
    /// Feed all three series as input channels (x, y, z order).
    pub conditional: bool,
    /// Emit all three series as targets (x, y, z order).
    pub multitask: bool,
    /// Predicted series for single-task windows, and the input series when unconditional.
    pub target: Series,
    pub layout: Layout,
}

impl WindowSpec {
    pub fn channels(&self) -> usize {
        if self.conditional {
            3
        } else {
            1
        }
    }

    pub fn n_tasks(&self) -> usize {
        if self.multitask {
            3
        } else {
            1
        }
    }

    fn input_series(&self) -> Vec<Series> {
        if self.conditional {
            Series::ALL.to_vec()
        } else {
            vec![self.target]
        }
    }

    pub fn target_series(&self) -> Vec<Series> {
        if self.multitask {
            Series::ALL.to_vec()
        } else {
            vec![self.target]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// Laid out according to `layout`.
    pub inputs: Array3<f64>,
    /// examples x n_tasks
    pub targets: Array2<f64>,
    /// Index into the source series of each example's target.
    pub target_index: Vec<usize>,
    pub window: usize,
    pub channels: usize,
    pub layout: Layout,
    pub target_series: Vec<Series>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_tasks(&self) -> usize {
        self.targets.ncols()
    }

    /// Input of example `i` as channels x width, independent of layout.
    pub fn window_of(&self, i: usize) -> Array2<f64> {
        Array2::from_shape_fn((self.channels, self.window), |(c, w)| {
            self.input_at(i, c, w)
        })
    }

    fn input_at(&self, example: usize, channel: usize, pos: usize) -> f64 {
        match self.layout {
            Layout::Conv => self.inputs[[example, channel, pos]],
            Layout::Recurrent => self.inputs[[pos, example, channel]],
        }
    }

    /// Gather examples into a batch in this dataset's layout.
    pub fn batch(&self, indices: &[usize]) -> (Array3<f64>, Array2<f64>) {
        let (c, w, b) = (self.channels, self.window, indices.len());
        let inputs = match self.layout {
            Layout::Conv => {
                Array3::from_shape_fn((b, c, w), |(i, ch, p)| self.inputs[[indices[i], ch, p]])
            }
            Layout::Recurrent => {
                Array3::from_shape_fn((w, b, c), |(p, i, ch)| self.inputs[[p, indices[i], ch]])
            }
        };
        let targets =
            Array2::from_shape_fn((b, self.n_tasks()), |(i, j)| self.targets[[indices[i], j]]);
        (inputs, targets)
    }
}

/// Window every index of the series set; see [`make_windows_range`].
pub fn make_windows(set: &SeriesSet, spec: &WindowSpec) -> Result<WindowedDataset> {
    make_windows_range(set, spec, 0..set.len())
}

/// Build examples whose targets are the series values at `targets`. Each
/// input holds the `window` values strictly before the target index, with
/// zeros standing in for indices before the start of the series.
pub fn make_windows_range(
    set: &SeriesSet,
    spec: &WindowSpec,
    targets: Range<usize>,
) -> Result<WindowedDataset> {
    if spec.window == 0 {
        return Err(Error::InvalidParams("window must be >= 1".into()));
    }
    if targets.end > set.len() {
        return Err(Error::InsufficientData {
            needed: targets.end,
            available: set.len(),
        });
    }
    let inputs_s = spec.input_series();
    let targets_s = spec.target_series();
    let n = targets.len();
    let (c, w) = (inputs_s.len(), spec.window);

    // value of input channel `ch` at window position `p` for target index `t`
    let value = |ch: usize, p: usize, t: usize| -> f64 {
        // position p in [0, w) sits at series index t - w + p
        match (t + p).checked_sub(w) {
            Some(idx) => set.get(inputs_s[ch])[idx],
            None => 0.0,
        }
    };
    let start = targets.start;
    let inputs = match spec.layout {
        Layout::Conv => Array3::from_shape_fn((n, c, w), |(i, ch, p)| value(ch, p, start + i)),
        Layout::Recurrent => Array3::from_shape_fn((w, n, c), |(p, i, ch)| value(ch, p, start + i)),
    };
    let tgt = Array2::from_shape_fn((n, targets_s.len()), |(i, j)| {
        set.get(targets_s[j])[start + i]
    });

    Ok(WindowedDataset {
        inputs,
        targets: tgt,
        target_index: targets.collect(),
        window: w,
        channels: c,
        layout: spec.layout,
        target_series: targets_s,
    })
}

/// Train and test datasets over one scaled series set. Test windows take
/// their history from the end of the training span rather than from padding.
pub fn train_test_windows(
    set: &SeriesSet,
    spec: &WindowSpec,
    n_train: usize,
    n_test: usize,
) -> Result<(WindowedDataset, WindowedDataset)> {
    let needed = n_train + n_test;
    if needed > set.len() {
        return Err(Error::InsufficientData {
            needed,
            available: set.len(),
        });
    }
    Ok((
        make_windows_range(set, spec, 0..n_train)?,
        make_windows_range(set, spec, n_train..needed)?,
    ))
}
