//! Adaptive Simpson quadrature that returns its nodes and weights, so an
//! integral of `f(x)·g(x)` can be rebuilt for any `g` from samples of `f`.

/// Nodes `(x, weight)` sorted by `x`, with shared panel endpoints merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Rule {
    pub nodes: Vec<(f64, f64)>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().map(|&(x, w)| w * f(x)).sum()
    }

    fn push(&mut self, x: f64, w: f64) {
        match self.nodes.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => self.nodes.push((x, w)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Relative tolerance on each top-level panel.
    pub rel_tol: f64,
    /// Panels narrower than this are accepted as they are.
    pub min_width: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            min_width: 1e-13,
            max_depth: 48,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Builds an adaptive Simpson rule for `f` over `[a, b]`. `breaks` are
/// extra panel boundaries; put known peaks there so that no panel can
/// straddle one unseen.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], opts: AdaptiveOptions) -> Rule {
    let mut edges: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut rule = Rule::default();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(b > a) {
            continue;
        }
        let (fa, fb) = (f(a), f(b));
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = simpson(a, b, fa, fm, fb);
        let tol = opts.rel_tol * whole.abs();
        refine(&f, Panel { a, b, fa, fm, fb, whole }, tol, opts, 0, &mut rule);
    }
    rule
}

fn refine(f: &impl Fn(f64) -> f64, p: Panel, tol: f64, opts: AdaptiveOptions, depth: u32, rule: &mut Rule) {
    let m = 0.5 * (p.a + p.b);
    let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(p.a, m, p.fa, flm, p.fm);
    let right = simpson(m, p.b, p.fm, frm, p.fb);
    let err = left + right - p.whole;
    if err.abs() <= 15.0 * tol || depth >= opts.max_depth || p.b - p.a <= opts.min_width {
        let h = (p.b - p.a) / 12.0;
        rule.push(p.a, h);
        rule.push(lm, 4.0 * h);
        rule.push(m, 2.0 * h);
        rule.push(rm, 4.0 * h);
        rule.push(p.b, h);
        return;
    }
    let l = Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left };
    let r = Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right };
    refine(f, l, tol / 2.0, opts, depth + 1, rule);
    refine(f, r, tol / 2.0, opts, depth + 1, rule);
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
