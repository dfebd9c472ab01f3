//! Finite RC-ladder (Morrison network) realization of a CPE.
//!
//! The network is a parallel array of series-RC branches whose time
//! constants grow geometrically, `tau_i = tau_0 * k_f^i` for
//! `i = -N..N`, plus a terminating capacitor `C_t` standing in for all
//! faster branches. Branch values follow
//! `R_i = R_0 k^i`, `C_i = C_0 [k^(1/alpha - 1)]^i` with `k = k_f^alpha`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fractional::{cpe_impedance, CpeParams};

/// Synthesis request: target CPE, branch half-count and log-resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorrisonSpec {
    pub target: CpeParams,
    pub n_half: usize,
    pub k_f: f64,
}

impl MorrisonSpec {
    pub fn new(target: CpeParams, n_half: usize, k_f: f64) -> Result<Self> {
        if n_half < 1 {
            return Err(Error::InvalidParameter("n_half must be >= 1".into()));
        }
        if !(k_f > 1.0) || !k_f.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "k_f must exceed 1, got {k_f}"
            )));
        }
        Ok(Self { target, n_half, k_f })
    }
}

/// One series-RC branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub r: f64,
    pub c: f64,
}

impl Branch {
    pub fn tau(&self) -> f64 {
        self.r * self.c
    }
}

/// A synthesized ladder: branches ordered by increasing time constant
/// (index `-N..N`), terminating capacitor, and the CPE it approximates.
#[derive(Debug, Clone, PartialEq)]
pub struct MorrisonNetwork {
    branches: Vec<Branch>,
    c_t: f64,
    target: CpeParams,
}

impl MorrisonNetwork {
    /// Assemble from explicit parts, checking the ladder invariants:
    /// positive values and a constant time-constant ratio.
    pub fn from_parts(branches: Vec<Branch>, c_t: f64, target: CpeParams) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidParameter("network has no branches".into()));
        }
        if !(c_t > 0.0) || branches.iter().any(|b| !(b.r > 0.0) || !(b.c > 0.0)) {
            return Err(Error::InvalidParameter(
                "all R, C and C_t must be positive".into(),
            ));
        }
        if branches.len() > 1 {
            let ratio = branches[1].tau() / branches[0].tau();
            for w in branches.windows(2) {
                let r = w[1].tau() / w[0].tau();
                if !(r > 1.0) || (r / ratio - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(
                        "branch time constants must increase by a constant ratio".into(),
                    ));
                }
            }
        }
        Ok(Self { branches, c_t, target })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn c_t(&self) -> f64 {
        self.c_t
    }

    pub fn target(&self) -> CpeParams {
        self.target
    }

    pub fn n_half(&self) -> usize {
        (self.branches.len() - 1) / 2
    }

    /// Center-branch values (index 0).
    pub fn center(&self) -> Branch {
        self.branches[self.branches.len() / 2]
    }

    /// Smallest branch time constant; sets the stable simulation step.
    pub fn tau_min(&self) -> f64 {
        self.branches[0].tau()
    }

    pub fn tau_max(&self) -> f64 {
        self.branches[self.branches.len() - 1].tau()
    }

    /// Plain-text table: header row carries C_t and the target CPE, then
    /// one row per branch (index, R in ohm, C in F).
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        out.push_str("c_t_F,alpha,c_f_AsaV\n");
        out.push_str(&format!("{},{},{}\n", self.c_t, self.target.alpha, self.target.c_f));
        out.push_str("index,r_ohm,c_F\n");
        let n = self.n_half() as i64;
        for (j, b) in self.branches.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", j as i64 - n, b.r, b.c));
        }
        out
    }

    pub fn from_table_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let parse_f = |line: usize, field: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line + 1,
                message: format!("expected a number, got {field:?}"),
            })
        };
        let expect = |item: Option<(usize, &str)>, what: &str| -> Result<(usize, String)> {
            item.map(|(n, s)| (n, s.to_string())).ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing {what}"),
            })
        };
        let (n_hdr, hdr) = expect(lines.next(), "header row")?;
        if hdr.trim() != "c_t_F,alpha,c_f_AsaV" {
            return Err(Error::Parse {
                line: n_hdr + 1,
                message: "expected header c_t_F,alpha,c_f_AsaV".into(),
            });
        }
        let (n_vals, vals) = expect(lines.next(), "header values")?;
        let fields: Vec<&str> = vals.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: n_vals + 1,
                message: format!("expected 3 header fields, got {}", fields.len()),
            });
        }
        let c_t = parse_f(n_vals, fields[0])?;
        let alpha = parse_f(n_vals, fields[1])?;
        let c_f = parse_f(n_vals, fields[2])?;
        let target = CpeParams::new(alpha, c_f)?;
        let (n_cols, cols) = expect(lines.next(), "column header")?;
        if cols.trim() != "index,r_ohm,c_F" {
            return Err(Error::Parse {
                line: n_cols + 1,
                message: "expected column header index,r_ohm,c_F".into(),
            });
        }
        let mut branches = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected 3 fields, got {}", fields.len()),
                });
            }
            branches.push(Branch {
                r: parse_f(n, fields[1])?,
                c: parse_f(n, fields[2])?,
            });
        }
        Self::from_parts(branches, c_t, target)
    }
}

/// Smallest `n_half` able to cover `band` at resolution `k_f`: branches
/// at spacing `k_f` must span time constants `1/(2 pi f_max)` to
/// `1/(2 pi f_min)` around the band's geometric center.
pub fn required_n_half(band: (f64, f64), k_f: f64) -> usize {
    (0.5 * (band.1 / band.0).ln() / k_f.ln()).ceil() as usize
}

fn check_band(band: (f64, f64)) -> Result<()> {
    let (f_min, f_max) = band;
    if !(f_min > 0.0 && f_max > f_min) || !f_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "band must satisfy 0 < f_min < f_max, got ({f_min}, {f_max})"
        )));
    }
    Ok(())
}

/// Synthesize a ladder realizing `spec.target` over `band` (Hz).
///
/// The center-branch time constant sits at the geometric center of the
/// band; the overall impedance scale is then fixed by least-squares
/// matching of `log |Z|` against the target CPE on a log grid across the
/// central decade. Rejects `alpha = 1` (the terminating-capacitor
/// formula degenerates; use an ideal capacitor instead) and bands too
/// wide for `2 n_half + 1` branches at resolution `k_f`.
pub fn synthesize(spec: &MorrisonSpec, band: (f64, f64)) -> Result<MorrisonNetwork> {
    check_band(band)?;
    let alpha = spec.target.alpha;
    if alpha >= 1.0 {
        return Err(Error::DegenerateAlphaOne);
    }
    let required = required_n_half(band, spec.k_f);
    if spec.n_half < required {
        return Err(Error::InsufficientBranches {
            required,
            given: spec.n_half,
        });
    }

    let k = spec.k_f.powf(alpha);
    let c_ratio = spec.k_f.powf(1.0 - alpha); // k^(1/alpha - 1)
    let f_center = (band.0 * band.1).sqrt();
    let tau_0 = 1.0 / (std::f64::consts::TAU * f_center);
    let n = spec.n_half as i32;

    // Provisional ladder with R_0 = 1; overall scale fixed below.
    let mut branches: Vec<Branch> = (-n..=n)
        .map(|i| Branch {
            r: k.powi(i),
            c: tau_0 * c_ratio.powi(i),
        })
        .collect();
    let mut c_t = branches[0].c * c_ratio / (c_ratio - 1.0);

    let provisional = MorrisonNetwork {
        branches: branches.clone(),
        c_t,
        target: spec.target,
    };
    let grid = log_grid((f_center / 10f64.sqrt(), f_center * 10f64.sqrt()), 25);
    let mut log_scale = 0.0;
    for &f in &grid {
        let z_cpe = cpe_impedance(&spec.target, f)?;
        let z_net = network_impedance(&provisional, f)?;
        log_scale += (z_cpe.norm() / z_net.norm()).ln();
    }
    let scale = (log_scale / grid.len() as f64).exp();

    for b in &mut branches {
        b.r *= scale;
        b.c /= scale;
    }
    c_t /= scale;

    Ok(MorrisonNetwork {
        branches,
        c_t,
        target: spec.target,
    })
}

/// Exact impedance of the parallel combination:
/// `Z = 1 / (jw C_t + sum_i 1/(R_i + 1/(jw C_i)))`.
pub fn network_impedance(net: &MorrisonNetwork, frequency: f64) -> Result<Complex64> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::NonPositiveFrequency(frequency));
    }
    let w = std::f64::consts::TAU * frequency;
    let mut y = Complex64::new(0.0, w * net.c_t);
    for b in net.branches() {
        y += (Complex64::new(b.r, -1.0 / (w * b.c))).inv();
    }
    Ok(y.inv())
}

/// One row of an approximation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationRow {
    pub frequency: f64,
    pub mag_net: f64,
    pub mag_cpe: f64,
    pub phase_net_deg: f64,
    pub phase_cpe_deg: f64,
    pub mag_err_pct: f64,
    pub phase_err_deg: f64,
}

/// Compare the network against its stored target CPE on a log-spaced
/// grid over `band`.
pub fn approximation_report(
    net: &MorrisonNetwork,
    band: (f64, f64),
    grid_points: usize,
) -> Result<Vec<ApproximationRow>> {
    check_band(band)?;
    if grid_points < 2 {
        return Err(Error::InvalidParameter("need at least 2 grid points".into()));
    }
    let target = net.target();
    log_grid(band, grid_points)
        .into_iter()
        .map(|f| {
            let z_net = network_impedance(net, f)?;
            let z_cpe = cpe_impedance(&target, f)?;
            Ok(ApproximationRow {
                frequency: f,
                mag_net: z_net.norm(),
                mag_cpe: z_cpe.norm(),
                phase_net_deg: z_net.arg().to_degrees(),
                phase_cpe_deg: z_cpe.arg().to_degrees(),
                mag_err_pct: (z_net.norm() / z_cpe.norm() - 1.0) * 100.0,
                phase_err_deg: z_net.arg().to_degrees() - z_cpe.arg().to_degrees(),
            })
        })
        .collect()
}

/// Log-spaced frequency grid, inclusive of both band edges.
pub fn log_grid(band: (f64, f64), points: usize) -> Vec<f64> {
    let (lo, hi) = (band.0.ln(), band.1.ln());
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}
