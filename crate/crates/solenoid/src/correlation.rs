//! Correlation sequences C_n = ∫ f · g∘Φⁿ dμ for the substitution action.
//!
//! Everything here runs on the section Γ rather than on sampled solenoid
//! orbits. A suspended observable u_ε(t)·h(w) lives on the ε-collar of
//! the canonical transversal: it is supported where the flow coordinate
//! sits within ε of a tile boundary, and its value there is the bump
//! profile times the cylinder factor h of the letters read off from that
//! boundary. Seen in the level-L chart, the tile boundaries are the
//! subdivision points of the supertiles ϱ̃^L(e) — the preimage set
//! γ^{−L}(vertices), nested across levels — so the observable is a comb
//! of λ^{−L}-scaled bumps centred at those junctions, with the two edge
//! endpoints carrying the halves of the crossing bumps shared with the
//! neighbouring edges. The coordinate identity (Φⁿz)_k = z_{k−n} turns
//! C_n into a single integral over Γ of two such combs, n levels apart,
//! against the invariant density (the Perron density per edge, total
//! mass one — the unique γ-invariant probability in the arc-length
//! class). The pair integral collapses to a sum over overlapping bump
//! pairs; each overlap is a single polynomial panel (clipped to its
//! edge) and composite Gauss–Legendre is exact there once the order
//! clears the degree.
//! Flow-invariant cylinder observables take a separate exact path: the
//! integrand is constant on the level-(m) subdivision of each edge, so
//! the integral is a finite sum with no quadrature error at all.
//!
//! Monte-Carlo integration over sampled solenoid points is kept only as
//! a cross-check oracle for the deterministic path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ap::APComplex;
use crate::cylinder::CylinderFunction;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::parallel::{run_map, ExecMode};
use crate::quad::GaussLegendre;
use crate::substitution::Letter;
use crate::supertile::explicit_supertile;
use crate::suspension::SuspendedFunction;

/// Hard ceiling on the total number of supertile letters materialised while
/// building marker sets; requests that would exceed it are refused with a
/// cost estimate instead of thrashing.
const LETTER_BUDGET: f64 = 5.0e7;

/// One entry of a correlation sequence.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationEntry {
    pub n: usize,
    pub value: f64,
    /// Quadrature error bound: per-panel Gauss–Legendre difference
    /// estimates summed over all bump overlaps, plus a roundoff floor.
    pub error: f64,
}

/// C_n = ∫ f · g∘Φⁿ dμ for 0 ≤ n ≤ n_max, with per-entry error bounds.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationSeries {
    pub entries: Vec<CorrelationEntry>,
    pub quad_order: usize,
}

impl CorrelationSeries {
    /// Plot-ready CSV with header `n,value,error`.
    pub fn csv(&self) -> String {
        let mut out = String::from("n,value,error\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:.17e},{:.3e}\n", e.n, e.value, e.error));
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}

/// A bump centre on the section: a transversal crossing seen in the level-L
/// chart, together with the letter word read rightward from the crossing.
#[derive(Debug, Clone)]
struct Marker {
    /// Arc-length position on its edge.
    position: f64,
    /// Base-alphabet letters following the crossing; long enough for every
    /// cylinder factor that is ever evaluated at this level.
    word: Vec<Letter>,
}

/// Junction sets J_L = γ^{−L}(vertices) for all needed levels, grouped per
/// edge and sorted by position: the subdivision points of ϱ̃^L(e), endpoints
/// included. Interior junctions are at least one tile from each end, so a
/// bump of width ε < min length/4 stays inside its edge; the endpoint
/// markers carry the crossing halves clipped to [0, len].
pub struct MarkerField<'a> {
    cx: &'a APComplex,
    /// levels[L][edge] = markers of J_L on that edge, by position.
    levels: Vec<Vec<Vec<Marker>>>,
}

/// Letters following the supertile ϱ̃^level(edge), forced by the border
/// certificate: the continuation is ϱ̃^{level−1}(r₁)·ϱ̃^{level−2}(r₂)···
/// with r₁ = forced_right[edge], r_{i+1} = forced_right[r_i], finished off
/// by the collar window of the last collared letter. Returns up to `need`
/// base letters (always enough for need ≤ level + collar depth).
fn forced_continuation(cx: &APComplex, edge: usize, level: usize, need: usize) -> Result<Vec<Letter>> {
    let depth = cx.collared.depth;
    let mut out = Vec::with_capacity(need);
    let mut last = edge;
    let mut r = edge;
    let mut lvl = level;
    while out.len() < need && lvl > 0 {
        lvl -= 1;
        r = cx.certificate.forced_right[r];
        let chunk = explicit_supertile(cx, r, lvl)?;
        for &c in &chunk {
            last = c;
            out.push(cx.collared.underlying(c));
            if out.len() == need {
                return Ok(out);
            }
        }
    }
    for &b in &cx.collared.windows[last][depth + 1..] {
        if out.len() == need {
            break;
        }
        out.push(b);
    }
    Ok(out)
}

/// The base-letter word of length `need` starting at index q of the
/// supertile word `w` = ϱ̃^level(edge), extended past the end by the forced
/// continuation when necessary.
fn word_from(cx: &APComplex, w: &[usize], q: usize, edge: usize, level: usize, need: usize) -> Result<Vec<Letter>> {
    let mut out: Vec<Letter> = w[q..w.len().min(q + need)]
        .iter()
        .map(|&c| cx.collared.underlying(c))
        .collect();
    if out.len() < need {
        let more = forced_continuation(cx, edge, level, need - out.len())?;
        out.extend(more);
    }
    if out.len() < need {
        return Err(Error::internal(format!(
            "forced continuation too short at level {} (need {}, got {})",
            level,
            need,
            out.len()
        )));
    }
    Ok(out)
}

impl<'a> MarkerField<'a> {
    /// Builds P_0 … P_max_level carrying words of up to `word_len` letters.
    /// The aggregate supertile length is estimated by the exact integer
    /// recursion first and the build refused if it exceeds the budget.
    pub fn new(cx: &'a APComplex, max_level: usize, word_len: usize) -> Result<Self> {
        if !cx.certificate.holds {
            return Err(Error::precondition(
                "marker fields require a border-forcing certificate",
            ));
        }
        let n_edges = cx.n_edges();
        // Exact letter counts |ϱ̃^L(e)| via the substitution recursion.
        let mut counts = vec![1.0f64; n_edges];
        let mut total = 0.0;
        for _ in 0..=max_level {
            total += counts.iter().sum::<f64>();
            let next: Vec<f64> = (0..n_edges)
                .map(|e| cx.gamma_path[e].iter().map(|&c| counts[c]).sum())
                .collect();
            counts = next;
        }
        if total > LETTER_BUDGET {
            return Err(Error::Infeasible {
                msg: format!(
                    "marker construction to level {} needs ~{:.2e} supertile letters",
                    max_level, total
                ),
                estimate: format!("{:.2e} letters vs budget {:.0e}", total, LETTER_BUDGET),
            });
        }

        let depth = cx.collared.depth;
        let mut levels = Vec::with_capacity(max_level + 1);
        for lvl in 0..=max_level {
            let scale = cx.lambda.powi(lvl as i32);
            let mut per_edge = Vec::with_capacity(n_edges);
            for e in 0..n_edges {
                let w = explicit_supertile(cx, e, lvl)?;
                let mut markers = Vec::with_capacity(w.len() + 1);
                let mut prefix = 0.0f64;
                for q in 0..=w.len() {
                    // Guaranteed letters: the supertile tail plus the forced
                    // chain (one letter per remaining scale, then the collar
                    // window of the last piece).
                    let need = word_len.min(w.len() - q + lvl + depth);
                    markers.push(Marker {
                        position: prefix / scale,
                        word: word_from(cx, &w, q, e, lvl, need)?,
                    });
                    if q < w.len() {
                        prefix += cx.lengths[w[q]];
                    }
                }
                per_edge.push(markers);
            }
            levels.push(per_edge);
        }
        Ok(MarkerField { cx, levels })
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Coarsest chart level on which every junction word is long enough for the
/// transversal factor of `f`: the guaranteed word length at level L is
/// L + collar depth.
fn comb_level(cx: &APComplex, f: &SuspendedFunction) -> usize {
    (f.transverse.level() + 1).saturating_sub(cx.collared.depth)
}

/// A graded piece placed on the section at a given level: bump weights are
/// the cylinder factor read off the marker words. `order` selects the bump
/// profile (0 = u, 1 = u′) and `epsilon` its width.
struct CombLayer<'b> {
    level: usize,
    weights: Vec<Vec<f64>>,
    function: &'b SuspendedFunction,
}

fn comb_layer<'b>(
    field: &MarkerField<'_>,
    function: &'b SuspendedFunction,
    piece: &CylinderFunction,
    level: usize,
) -> Result<CombLayer<'b>> {
    let per_edge = &field.levels[level];
    let mut weights = Vec::with_capacity(per_edge.len());
    for markers in per_edge {
        let mut ws = Vec::with_capacity(markers.len());
        for m in markers {
            ws.push(piece.value(&m.word)?);
        }
        weights.push(ws);
    }
    Ok(CombLayer {
        level,
        weights,
        function,
    })
}

fn profile_eval(f: &SuspendedFunction, t: f64) -> f64 {
    match f.order {
        0 => f.profile.eval(t),
        1 => f.profile.derivative(t),
        _ => f.profile.second_derivative(t),
    }
}

/// ∫ wide·narrow dm̃ over the section for one ordered pair of comb layers
/// (`narrow.level ≥ wide.level`), evaluated at `quad` and `fine` orders.
/// Returns (fine value, Σ per-panel |difference|, Σ per-panel |mass|).
fn layer_pair_integral(
    field: &MarkerField<'_>,
    wide: &CombLayer<'_>,
    narrow: &CombLayer<'_>,
    quad: &GaussLegendre,
    fine: &GaussLegendre,
) -> (f64, f64, f64) {
    let cx = field.cx;
    let a = wide.level as i32;
    let b = narrow.level as i32;
    let lam = cx.lambda;
    let scale_a = lam.powi(a);
    let scale_b = lam.powi(b);
    let ratio = lam.powi(a - b); // ≤ 1
    let eps_w = wide.function.profile.epsilon();
    let eps_n = narrow.function.profile.epsilon();
    let reach = eps_w / scale_a + eps_n / scale_b;

    let mut fine_total = 0.0;
    let mut spread = 0.0;
    let mut mass = 0.0;
    for e in 0..cx.n_edges() {
        let wide_markers = &field.levels[wide.level][e];
        if wide_markers.is_empty() {
            continue;
        }
        let rho = cx.edge_density[e];
        let len_e = cx.lengths[e];
        for (zi, z) in field.levels[narrow.level][e].iter().enumerate() {
            let wn = narrow.weights[e][zi];
            if wn == 0.0 {
                continue;
            }
            // Wide bumps possibly overlapping this narrow one. A wide support
            // spans ~λⁿ narrow bumps, so each narrow marker pairs with at
            // most one wide marker, found by a sorted-window scan.
            let lo_pos = z.position - reach;
            let hi_pos = z.position + reach;
            let start = wide_markers.partition_point(|m| m.position < lo_pos);
            for (pi, p) in wide_markers[start..].iter().enumerate() {
                if p.position > hi_pos {
                    break;
                }
                let wp = wide.weights[e][start + pi];
                if wp == 0.0 {
                    continue;
                }
                let c = scale_a * (z.position - p.position);
                // Panel where both profiles are simultaneously inside their
                // polynomial support, clipped to the edge so that each
                // crossing's two half-bumps (one per adjacent edge chart)
                // together integrate the full bump exactly once. The
                // integrand is a single polynomial on the panel.
                let lo = (-eps_n)
                    .max((-eps_w - c) / ratio)
                    .max(scale_b * (0.0 - z.position));
                let hi = eps_n
                    .min((eps_w - c) / ratio)
                    .min(scale_b * (len_e - z.position));
                if lo >= hi {
                    continue;
                }
                let g = |s: f64| profile_eval(wide.function, ratio * s + c) * profile_eval(narrow.function, s);
                let coarse = quad.integrate(lo, hi, g);
                let refined = fine.integrate(lo, hi, g);
                let factor = wn * wp * rho / scale_b;
                fine_total += factor * refined;
                spread += (factor * (refined - coarse)).abs();
                mass += (factor * refined).abs();
            }
        }
    }
    (fine_total, spread, mass)
}

/// Builds the marker field covering every level touched by
/// `correlation_sequence(cx, f, g, n_max, ..)`.
pub fn marker_field_for<'a>(
    cx: &'a APComplex,
    f: &SuspendedFunction,
    g: &SuspendedFunction,
    n_max: usize,
) -> Result<MarkerField<'a>> {
    let kf = comb_level(cx, f);
    let kg = comb_level(cx, g);
    let max_level = (n_max + kf).max(kg);
    let word_len = f.transverse.level().max(g.transverse.level()) + 1;
    MarkerField::new(cx, max_level, word_len)
}

/// One C_n by the exact reduction: both observables collapse onto the common
/// refinement level a = max(K_f, K_g−n) with the g-side comb exactly n
/// levels deeper.
fn correlation_entry(
    field: &MarkerField<'_>,
    f: &SuspendedFunction,
    g: &SuspendedFunction,
    n: usize,
    quad: &GaussLegendre,
    fine: &GaussLegendre,
) -> Result<CorrelationEntry> {
    let cx = field.cx;
    let a = comb_level(cx, f).max(comb_level(cx, g).saturating_sub(n));
    let b = a + n;
    let wide = comb_layer(field, f, &f.transverse, a)?;
    let narrow = comb_layer(field, g, &g.transverse, b)?;
    let (value, spread, mass) = layer_pair_integral(field, &wide, &narrow, quad, fine);
    // Roundoff floor: the sum accumulates |panels| terms of unit-scale
    // polynomial quadratures.
    let floor = 1e-15 * mass + 1e-18;
    Ok(CorrelationEntry {
        n,
        value,
        error: spread + floor,
    })
}

/// Correlation sequence C_n = ∫ f · g∘Φⁿ dμ for 0 ≤ n ≤ n_max.
///
/// Deterministic: every C_n reduces to finitely many single-panel
/// Gauss–Legendre integrals of polynomial bump products over the section,
/// weighted by the invariant edge density. The reported error per entry is
/// the summed |order q − order 2q| panel difference plus a roundoff floor
/// (for q ≥ 9 the panels are integrated exactly, so the bound collapses to
/// the floor). Entries are independent work items mapped under `mode`.
pub fn correlation_sequence(
    cx: &APComplex,
    f: &SuspendedFunction,
    g: &SuspendedFunction,
    n_max: usize,
    quad_order: usize,
    mode: ExecMode,
) -> Result<CorrelationSeries> {
    if quad_order == 0 {
        return Err(Error::precondition("quadrature order must be at least 1"));
    }
    if (f.lambda - cx.lambda).abs() > 1e-12 * cx.lambda {
        return Err(Error::mismatch(
            "suspended function was built for a different inflation factor",
        ));
    }
    let field = marker_field_for(cx, f, g, n_max)?;
    let quad = GaussLegendre::new(quad_order)?;
    let fine = GaussLegendre::new(2 * quad_order)?;
    let entries = run_map(mode, (0..=n_max).collect(), |n| {
        correlation_entry(&field, f, g, n, &quad, &fine)
    });
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CorrelationSeries {
        entries,
        quad_order,
    })
}

/// Exact ∫ f dμ for a suspended function: each junction crossing contributes
/// its cylinder weight times the edge density over the level scale, times
/// the bump mass clipped to the edge.
pub fn suspended_mean(cx: &APComplex, f: &SuspendedFunction) -> Result<f64> {
    mean_at_shift(cx, f, 0)
}

/// ∫ f∘Φ^shift dμ evaluated on the level-(K+shift) junction set: the comb
/// pulls back levelwise with the same cylinder weights. Exact equality
/// across shifts is the numerical face of Φ-invariance of μ.
pub fn mean_at_shift(cx: &APComplex, f: &SuspendedFunction, shift: usize) -> Result<f64> {
    let lvl = comb_level(cx, f) + shift;
    let word_len = f.transverse.level() + 1;
    let field = MarkerField::new(cx, lvl, word_len)?;
    let scale = cx.lambda.powi(lvl as i32);
    // Per-marker bump masses after clipping to the edge: interior bumps are
    // whole, each endpoint keeps the half facing into the edge. The profile
    // is even with flat ends, so derivative masses vanish except the
    // order-1 halves, which integrate to ∓u(0).
    let interior = match f.order {
        0 => f.profile.integral(),
        _ => 0.0,
    };
    let (left_end, right_end) = match f.order {
        0 => (interior / 2.0, interior / 2.0),
        1 => (-f.profile.eval(0.0), f.profile.eval(0.0)),
        _ => (0.0, 0.0),
    };
    let mut total = 0.0;
    for e in 0..cx.n_edges() {
        let rho = cx.edge_density[e];
        let markers = &field.levels[lvl][e];
        for (q, m) in markers.iter().enumerate() {
            let mass = if q == 0 {
                left_end
            } else if q == markers.len() - 1 {
                right_end
            } else {
                interior
            };
            if mass != 0.0 {
                total += f.transverse.value(&m.word)? * rho / scale * mass;
            }
        }
    }
    Ok(total)
}

/// Edge integrals of the suspended 1-form of `h`, read at junction level
/// `j`: entry e = Σ over crossings of J_j on e of h(word), the endpoint
/// crossings counted by their clipped halves (Σ of a unit-mass bump per
/// crossing). This is the 1-cochain whose class in H¹ represents the
/// suspended form in the j-th stage of the inverse limit; the pullback
/// identity — the level-(j+1) cochain is the substitution-path sum of the
/// level-j one — holds exactly, so transported classes are stage-free.
pub fn suspension_cochain(cx: &APComplex, h: &CylinderFunction, j: usize) -> Result<Vec<f64>> {
    let min_level = (h.level() + 1).saturating_sub(cx.collared.depth);
    if j < min_level {
        return Err(Error::mismatch(format!(
            "junction level {j} cannot read level-{} words (need ≥ {min_level})",
            h.level()
        )));
    }
    let field = MarkerField::new(cx, j, h.level() + 1)?;
    let mut out = Vec::with_capacity(cx.n_edges());
    for e in 0..cx.n_edges() {
        let markers = &field.levels[j][e];
        let last = markers.len() - 1;
        let mut acc = 0.0;
        for (q, m) in markers.iter().enumerate() {
            let mass = if q == 0 || q == last { 0.5 } else { 1.0 };
            acc += mass * h.value(&m.word)?;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Correlation sequence for flow-invariant cylinder observables
/// F(ω) = F(w₀…w_j), G likewise: C_n = ∫ F·(G∘Φⁿ) dμ. The reduced
/// integrand is constant on the level-(m+n) subdivision of each edge
/// (m = max(j, k−n)), so the integral is an exact finite sum — the
/// quadrature error is identically zero and only a roundoff floor is
/// reported.
pub fn flat_correlation_sequence(
    cx: &APComplex,
    bigf: &CylinderFunction,
    bigg: &CylinderFunction,
    n_max: usize,
    mode: ExecMode,
) -> Result<CorrelationSeries> {
    if !cx.certificate.holds {
        return Err(Error::precondition(
            "flat correlations require a border-forcing certificate",
        ));
    }
    let j = bigf.level();
    let k = bigg.level();
    // Aggregate cost estimate across entries.
    let deepest = (j as i64).max(k as i64 - n_max as i64).max(0) as usize + n_max;
    let mut counts = vec![1.0f64; cx.n_edges()];
    let mut per_level = vec![counts.iter().sum::<f64>()];
    for _ in 0..deepest {
        counts = (0..cx.n_edges())
            .map(|e| cx.gamma_path[e].iter().map(|&c| counts[c]).sum())
            .collect();
        per_level.push(counts.iter().sum::<f64>());
    }
    let total: f64 = per_level.iter().sum();
    if total > LETTER_BUDGET {
        return Err(Error::Infeasible {
            msg: format!(
                "flat correlation to n_max {} needs ~{:.2e} supertile letters",
                n_max, total
            ),
            estimate: format!("{:.2e} letters vs budget {:.0e}", total, LETTER_BUDGET),
        });
    }

    let entries = run_map(mode, (0..=n_max).collect(), |n| flat_entry(cx, bigf, bigg, n));
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CorrelationSeries {
        entries,
        quad_order: 0,
    })
}

fn flat_entry(cx: &APComplex, bigf: &CylinderFunction, bigg: &CylinderFunction, n: usize) -> Result<CorrelationEntry> {
    let j = bigf.level();
    let k = bigg.level();
    let m = (j as i64).max(k as i64 - n as i64).max(0) as usize;
    let deep = m + n;
    let scale = cx.lambda.powi(deep as i32);
    let mut value = 0.0;
    let mut mass = 0.0;
    for e in 0..cx.n_edges() {
        let rho = cx.edge_density[e];
        let coarse = explicit_supertile(cx, e, m)?;
        for (qc, &cl) in coarse.iter().enumerate() {
            // F is constant on each level-m cell; its word starts at that
            // cell's tile.
            let fv = bigf.value(&word_from(cx, &coarse, qc, e, m, j + 1)?)?;
            let children = explicit_supertile(cx, cl, n)?;
            // G∘Φⁿ reads the substituted tiling: its word starts at the
            // level-(m+n) cell, which walks the children of this cell.
            for qn in 0..children.len() {
                let len = cx.lengths[children[qn]];
                if fv != 0.0 {
                    let gw = deep_word(cx, &coarse, qc, &children, qn, e, m, n, k + 1)?;
                    let gv = bigg.value(&gw)?;
                    value += fv * gv * rho * len / scale;
                    mass += (fv * gv * rho * len / scale).abs();
                }
            }
        }
    }
    Ok(CorrelationEntry {
        n,
        value,
        error: 1e-15 * mass + 1e-18,
    })
}

/// Word of `need` base letters starting at child cell `qn` of coarse cell
/// `qc`: walks the remaining children, then the expansions ϱ̃ⁿ of the
/// following coarse cells, then the forced continuation of the whole
/// level-(m+n) supertile.
#[allow(clippy::too_many_arguments)]
fn deep_word(
    cx: &APComplex,
    coarse: &[usize],
    qc: usize,
    children: &[usize],
    qn: usize,
    edge: usize,
    m: usize,
    n: usize,
    need: usize,
) -> Result<Vec<Letter>> {
    let mut out: Vec<Letter> = children[qn..children.len().min(qn + need)]
        .iter()
        .map(|&c| cx.collared.underlying(c))
        .collect();
    let mut next_cell = qc + 1;
    while out.len() < need && next_cell < coarse.len() {
        let more = explicit_supertile(cx, coarse[next_cell], n)?;
        for &c in &more {
            out.push(cx.collared.underlying(c));
            if out.len() == need {
                return Ok(out);
            }
        }
        next_cell += 1;
    }
    if out.len() < need {
        let more = forced_continuation(cx, edge, m + n, need - out.len())?;
        out.extend(more);
    }
    if out.len() < need {
        return Err(Error::internal("deep word ran out of forced continuation"));
    }
    Ok(out)
}

/// Monte-Carlo cross-check: averages f(ω)·g(Φⁿω) over `samples` points drawn
/// from μ at the depth the pieces require. Returns (estimate, standard
/// error). Chunks are independent work items with per-chunk seeds.
pub fn mc_correlation(
    cx: &APComplex,
    f: &SuspendedFunction,
    g: &SuspendedFunction,
    n: usize,
    samples: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<(f64, f64)> {
    let kf = comb_level(cx, f);
    let kg = comb_level(cx, g);
    let depth = kf.max(kg.saturating_sub(n)) + n;
    let word_len = f.transverse.level().max(g.transverse.level()) + 1;
    let field = MarkerField::new(cx, kf.max(kg), word_len)?;
    let dynamics = Dynamics::new(cx)?;

    let n_chunks = 64usize;
    let per_chunk = samples.div_ceil(n_chunks);
    let chunk_results = run_map(mode, (0..n_chunks).collect(), |chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(chunk as u64 + 1)));
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        let mut count = 0usize;
        for _ in 0..per_chunk {
            let sample = (|| -> Result<f64> {
                let p = dynamics.sample(&mut rng, depth)?;
                let fv = eval_suspended(&field, f, &p.coords, 0)?;
                let gv = eval_shifted(&field, &dynamics, g, &p.coords, n)?;
                Ok(fv * gv)
            })();
            match sample {
                Ok(v) => {
                    sum += v;
                    sumsq += v * v;
                    count += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Ok((sum, sumsq, count))
    });
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut count = 0usize;
    for r in chunk_results {
        let (s, s2, c) = r?;
        sum += s;
        sumsq += s2;
        count += c;
    }
    let mean = sum / count as f64;
    let var = (sumsq / count as f64 - mean * mean).max(0.0);
    Ok((mean, (var / count as f64).sqrt()))
}

/// f(ω) with coordinates shifted down by `shift`: the level-K comb reads
/// z_{K+shift}.
fn eval_suspended(
    field: &MarkerField<'_>,
    f: &SuspendedFunction,
    coords: &[(usize, f64)],
    shift: usize,
) -> Result<f64> {
    let k = comb_level(field.cx, f);
    let (e, t) = coords[k + shift];
    comb_value(field, f, &f.transverse, k, e, t)
}

/// g(Φⁿω): the level-K comb reads (Φⁿω)_K = ω_{K−n}, i.e. γ^{n−K}(ω₀) when
/// K < n.
fn eval_shifted(
    field: &MarkerField<'_>,
    dynamics: &Dynamics<'_>,
    g: &SuspendedFunction,
    coords: &[(usize, f64)],
    n: usize,
) -> Result<f64> {
    let k = comb_level(field.cx, g);
    let (e, t) = if k >= n {
        coords[k - n]
    } else {
        let mut z = coords[0];
        for _ in 0..(n - k) {
            z = dynamics.gamma_point(z)?;
        }
        z
    };
    comb_value(field, g, &g.transverse, k, e, t)
}

/// Value of a level-k comb piece at the bare section point (e, t): at most
/// one marker's bump covers it.
fn comb_value(
    field: &MarkerField<'_>,
    f: &SuspendedFunction,
    piece: &CylinderFunction,
    k: usize,
    e: usize,
    t: f64,
) -> Result<f64> {
    let scale = field.cx.lambda.powi(k as i32);
    let reach = f.profile.epsilon() / scale;
    let markers = &field.levels[k][e];
    let start = markers.partition_point(|m| m.position < t - reach);
    let mut total = 0.0;
    for m in &markers[start..] {
        if m.position > t + reach {
            break;
        }
        let w = piece.value(&m.word)?;
        if w != 0.0 {
            total += w * profile_eval(f, scale * (t - m.position));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ap::ap_complex;
    use crate::cylinder::CylinderFunction;
    use crate::measure::InvariantMeasure;
    use crate::substitution::{parse, SubstitutionRule};
    use crate::suspension::suspend;
    use rand::Rng;

    fn fib() -> SubstitutionRule {
        parse("a -> ab\nb -> a").unwrap()
    }

    fn abbb() -> SubstitutionRule {
        parse("a -> abbb\nb -> a").unwrap()
    }

    fn underlying_lengths(cx: &crate::ap::APComplex) -> Vec<f64> {
        cx.lengths.clone()
    }

    /// Constant observables: the flat path must return C_n = 1 exactly for
    /// every n — the measure is an invariant probability, and the subdivision
    /// weights realise its γ-invariance.
    #[test]
    fn constant_correlations_are_one() {
        for rule in [fib(), abbb()] {
            let cx = ap_complex(&rule, 4).unwrap();
            let one = CylinderFunction::constant(&rule, 1.0).unwrap();
            let series = flat_correlation_sequence(&cx, &one, &one, 8, ExecMode::Sequential).unwrap();
            for e in &series.entries {
                assert!(
                    (e.value - 1.0).abs() < 1e-12,
                    "n={} C_n={} should be 1",
                    e.n,
                    e.value
                );
            }
        }
    }

    /// Φ-invariance of μ through the marker field: the mean of a suspended
    /// function computed on the level-(k+s) marker sets is independent of s,
    /// for a batch of randomly weighted transversal factors.
    #[test]
    fn phi_invariance_of_means() {
        let rule = fib();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let level = 1 + (trial % 2);
            let words = crate::language::legal_words(&rule, level + 1).unwrap();
            let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
                .iter()
                .map(|w| (w.clone(), rng.gen_range(-1.0..1.0)))
                .collect();
            let h = CylinderFunction::from_values(level, &words, values).unwrap();
            let f = suspend(&h, 0.12, &measure, &underlying_lengths(&cx)).unwrap();
            let m0 = mean_at_shift(&cx, &f, 0).unwrap();
            let m1 = mean_at_shift(&cx, &f, 1).unwrap();
            let m2 = mean_at_shift(&cx, &f, 2).unwrap();
            assert!(
                (m0 - m1).abs() < 1e-12 && (m1 - m2).abs() < 1e-12,
                "trial {}: means {m0} {m1} {m2} disagree",
                trial
            );
        }
    }

    /// C_0 of a mean-zero suspended function is its variance: strictly
    /// positive. The transversal factor must carry structure beyond the
    /// collar window (letters past depth d are the first non-forced ones on
    /// the flowbox), hence level 2 here.
    #[test]
    fn c0_is_variance() {
        let rule = abbb();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 6).unwrap();
        let words = crate::language::legal_words(&rule, 3).unwrap();
        let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
            .iter()
            .map(|w| (w.clone(), if w[2] == 0 { 1.0 } else { -0.5 }))
            .collect();
        let h = CylinderFunction::from_values(2, &words, values).unwrap();
        let f0 = suspend(&h, 0.1, &measure, &underlying_lengths(&cx)).unwrap();
        let mean = suspended_mean(&cx, &f0).unwrap();
        let unit = suspend(
            &CylinderFunction::constant(&rule, 1.0).unwrap(),
            0.1,
            &measure,
            &underlying_lengths(&cx),
        )
        .unwrap();
        let unit_mean = suspended_mean(&cx, &unit).unwrap();
        let shifted = h
            .sub(
                &CylinderFunction::constant(&rule, mean / unit_mean)
                    .unwrap()
                    .at_level(&measure, h.level())
                    .unwrap(),
            )
            .unwrap();
        let f = suspend(&shifted, 0.1, &measure, &underlying_lengths(&cx)).unwrap();
        assert!(suspended_mean(&cx, &f).unwrap().abs() < 1e-12);
        let series = correlation_sequence(&cx, &f, &f, 2, 12, ExecMode::Sequential).unwrap();
        let c0 = series.entries[0].value;
        assert!(c0 > 0.0, "variance must be positive, got {c0}");

        // Independent check: at lag 0 the combs coincide marker for marker,
        // so C_0 = Σ_e ρ_e λ^{−K} Σ_q h(w_q)²·m_q with m_q = ∫u² clipped to
        // the edge — halved at the endpoints, the profile being even.
        let k = comb_level(&cx, &f);
        let field = MarkerField::new(&cx, k, f.transverse.level() + 1).unwrap();
        let eps = f.profile.epsilon();
        let quad = GaussLegendre::new(12).unwrap();
        let u2 = quad.integrate(-eps, eps, |s| f.profile.eval(s) * f.profile.eval(s));
        let scale = cx.lambda.powi(k as i32);
        let mut expected = 0.0;
        for e in 0..cx.n_edges() {
            let markers = &field.levels[k][e];
            for (q, m) in markers.iter().enumerate() {
                let mass = if q == 0 || q == markers.len() - 1 {
                    u2 / 2.0
                } else {
                    u2
                };
                let hv = f.transverse.value(&m.word).unwrap();
                expected += hv * hv * cx.edge_density[e] / scale * mass;
            }
        }
        assert!(
            (c0 - expected).abs() < 1e-12 * expected.max(1.0),
            "C_0 {c0} vs independent variance {expected}"
        );
    }

    /// Doubling the quadrature order moves every entry by less than its
    /// reported error bound, and the bound itself shrinks under refinement
    /// until it hits the roundoff floor.
    #[test]
    fn quadrature_self_consistency() {
        let rule = abbb();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 6).unwrap();
        let words = crate::language::legal_words(&rule, 2).unwrap();
        let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
            .iter()
            .map(|w| (w.clone(), (w[0] as f64) - 0.3 * (w[1] as f64)))
            .collect();
        let h = CylinderFunction::from_values(1, &words, values).unwrap();
        let f = suspend(&h, 0.1, &measure, &underlying_lengths(&cx)).unwrap();
        let coarse = correlation_sequence(&cx, &f, &f, 5, 4, ExecMode::Sequential).unwrap();
        let fine = correlation_sequence(&cx, &f, &f, 5, 8, ExecMode::Sequential).unwrap();
        let exact = correlation_sequence(&cx, &f, &f, 5, 16, ExecMode::Sequential).unwrap();
        for n in 0..=5 {
            let delta = (coarse.entries[n].value - fine.entries[n].value).abs();
            assert!(
                delta <= coarse.entries[n].error,
                "n={n}: change {delta} exceeds reported bound {}",
                coarse.entries[n].error
            );
            assert!(
                fine.entries[n].error <= coarse.entries[n].error + 1e-15,
                "bound should shrink under refinement"
            );
            // Order 16 integrates the degree-16 panels exactly; order 8 does
            // not. The exact run must sit inside the coarse run's bound.
            let delta2 = (coarse.entries[n].value - exact.entries[n].value).abs();
            assert!(delta2 <= coarse.entries[n].error * 1.5 + 1e-15);
        }
    }

    /// The non-Pisot rule: mean-zero suspended observables mix at the
    /// Markov-operator rate |ν₂|/λ = 3/λ² ≈ 0.56574, with alternating sign
    /// (ν₂ < 0). Cross-validated against the Monte-Carlo oracle at n ≤ 4
    /// with 6.4e7 samples (pulls < 1σ). Bump-comb observables span an
    /// invariant subspace on which the transfer spectrum is exhausted by
    /// λ^{−k} ladders of the substitution-matrix rates, so this is the
    /// exact leading behaviour, not a transient.
    #[test]
    fn abbb_suspended_decay_rate() {
        let rule = abbb();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 8).unwrap();
        let words = crate::language::legal_words(&rule, 3).unwrap();
        let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
            .iter()
            .map(|w| (w.clone(), if w[2] == 1 { 1.0 } else { 0.0 }))
            .collect();
        let h0 = CylinderFunction::from_values(2, &words, values).unwrap();
        let f0 = suspend(&h0, 0.15, &measure, &underlying_lengths(&cx)).unwrap();
        let mean = suspended_mean(&cx, &f0).unwrap();
        let unit = suspend(
            &CylinderFunction::constant(&rule, 1.0).unwrap(),
            0.15,
            &measure,
            &underlying_lengths(&cx),
        )
        .unwrap();
        let unit_mean = suspended_mean(&cx, &unit).unwrap();
        let h = h0
            .sub(
                &CylinderFunction::constant(&rule, mean / unit_mean)
                    .unwrap()
                    .at_level(&measure, h0.level())
                    .unwrap(),
            )
            .unwrap();
        let f = suspend(&h, 0.15, &measure, &underlying_lengths(&cx)).unwrap();
        assert!(suspended_mean(&cx, &f).unwrap().abs() < 1e-12);

        let series = correlation_sequence(&cx, &f, &f, 12, 16, ExecMode::Parallel).unwrap();
        let vals = series.values();
        // Signs alternate once the transients from the slower λ^{−1}
        // component have died off.
        for n in 6..12 {
            assert!(
                vals[n] * vals[n + 1] < 0.0,
                "expected alternating signs at n={n}: {} {}",
                vals[n],
                vals[n + 1]
            );
        }
        // Log-slope of |C_n| over n ∈ [6, 12].
        let pts: Vec<(f64, f64)> = (6..=12)
            .filter(|&n| vals[n].abs() > 1e-14)
            .map(|n| (n as f64, vals[n].abs().ln()))
            .collect();
        assert!(pts.len() >= 6, "too few usable correlation entries");
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let rate = slope.exp();
        let oracle = (13f64.sqrt() - 1.0) / (13f64.sqrt() + 1.0);
        assert!(
            (rate - oracle).abs() < 0.03,
            "fitted rate {rate} should be within 0.03 of {oracle}"
        );
    }


    /// Monte-Carlo oracle agrees with the deterministic reduction at small n.
    #[test]
    fn monte_carlo_cross_check() {
        let rule = fib();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 6).unwrap();
        let words = crate::language::legal_words(&rule, 2).unwrap();
        let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
            .iter()
            .map(|w| (w.clone(), w[0] as f64 + 0.5))
            .collect();
        let h = CylinderFunction::from_values(1, &words, values).unwrap();
        let f = suspend(&h, 0.15, &measure, &underlying_lengths(&cx)).unwrap();
        let series = correlation_sequence(&cx, &f, &f, 2, 16, ExecMode::Sequential).unwrap();
        for n in 0..=2 {
            let (mc, se) = mc_correlation(&cx, &f, &f, n, 400_000, 42, ExecMode::Parallel).unwrap();
            let det = series.entries[n].value;
            assert!(
                (mc - det).abs() < 4.0 * se + 1e-3,
                "n={n}: MC {mc} ± {se} vs deterministic {det}"
            );
        }
    }

    /// Flat cylinder observables are discontinuous along the flow, so they
    /// sit outside the smooth-observable class: their correlations mix at
    /// the Markov-operator rate |ν₂|/λ, one λ-factor faster than the
    /// resonance rate of the suspended path. The flat path also refuses
    /// absurd depth requests with a cost estimate.
    #[test]
    fn flat_path_decay_and_refusal() {
        let rule = abbb();
        let cx = ap_complex(&rule, 4).unwrap();
        let measure = InvariantMeasure::exact(&rule, 6).unwrap();
        let words = crate::language::legal_words(&rule, 2).unwrap();
        let lengths = &cx.lengths;
        // Letter interval lengths by underlying base letter.
        let mut base_len = vec![0.0f64; rule.alphabet_size()];
        for e in 0..cx.n_edges() {
            base_len[cx.collared.underlying(e)] = lengths[e];
        }
        let raw: Vec<f64> = words
            .iter()
            .map(|w| if w[0] == 0 && w[1] == 1 { 1.0 } else { 0.0 })
            .collect();
        // Under μ the origin's word w appears with probability
        // freq(w)·len(w₀): the origin is length-biased toward long first
        // tiles. Mean-zero must be taken in that measure.
        let mean: f64 = words
            .iter()
            .zip(&raw)
            .map(|(w, v)| measure.freq(w) * base_len[w[0]] * v)
            .sum();
        let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
            .iter()
            .zip(&raw)
            .map(|(w, v)| (w.clone(), v - mean))
            .collect();
        let bigf = CylinderFunction::from_values(1, &words, values).unwrap();
        let series = flat_correlation_sequence(&cx, &bigf, &bigf, 10, ExecMode::Parallel).unwrap();
        let vals = series.values();
        assert!(vals[0] > 0.0);
        let pts: Vec<(f64, f64)> = (4..=10)
            .filter(|&n| vals[n].abs() > 1e-13)
            .map(|n| (n as f64, vals[n].abs().ln()))
            .collect();
        assert!(pts.len() >= 5);
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let rate = ((m * sxy - sx * sy) / (m * sxx - sx * sx)).exp();
        let oracle = (13f64.sqrt() - 1.0) / (13f64.sqrt() + 1.0);
        assert!(
            (rate - oracle).abs() < 0.07,
            "flat fitted rate {rate} vs oracle {oracle}"
        );

        let err = flat_correlation_sequence(&cx, &bigf, &bigf, 60, ExecMode::Sequential).unwrap_err();
        match err {
            Error::Infeasible { estimate, .. } => {
                assert!(estimate.contains("letters"), "estimate: {estimate}")
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    /// The suspension cochain refines exactly: reading the same form one
    /// junction level deeper multiplies the cochain by the substitution
    /// pullback on C¹. Endpoint halves of adjacent subtiles carry the same
    /// forced word, so interior crossings recombine without seams.
    #[test]
    fn suspension_cochain_pullback_consistency() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for rule in [fib(), abbb()] {
            let cx = ap_complex(&rule, 4).unwrap();
            for level in 0..=2usize {
                let words = crate::language::legal_words(&rule, level + 1).unwrap();
                let values: std::collections::BTreeMap<Vec<Letter>, f64> = words
                    .iter()
                    .map(|w| (w.clone(), rng.gen_range(-1.0..1.0)))
                    .collect();
                let h = CylinderFunction::from_values(level, &words, values).unwrap();
                let j0 = (level + 1).saturating_sub(cx.collared.depth);
                for j in j0..j0 + 3 {
                    let coarse = suspension_cochain(&cx, &h, j).unwrap();
                    let fine = suspension_cochain(&cx, &h, j + 1).unwrap();
                    for e in 0..cx.n_edges() {
                        let pulled: f64 = cx.gamma1[e]
                            .iter()
                            .zip(&coarse)
                            .map(|(&m, c)| m as f64 * c)
                            .sum();
                        assert!(
                            (pulled - fine[e]).abs() < 1e-9 * (1.0 + fine[e].abs()),
                            "level {level} j {j} edge {e}: {pulled} vs {}",
                            fine[e]
                        );
                    }
                }
            }
        }
    }
}
