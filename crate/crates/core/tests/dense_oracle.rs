//! Re-simulates random protocols on the full `B1 A M K B2` space with plain
//! dense matrices and compares every ledger entry with the library.

use nalgebra::DMatrix;
use num_complex::Complex64;

use demon_ledger::laws::evaluate;
use demon_ledger::operator::Operator;
use demon_ledger::protocol::ProtocolSpec;
use demon_ledger::scenarios::{random_protocol, ErasureMode, PointerClass, SampleConfig};
use demon_ledger::state::Gate;

type M = DMatrix<Complex64>;

struct Layout {
    names: Vec<String>,
    dims: Vec<usize>,
}

impl Layout {
    fn total(&self) -> usize {
        self.dims.iter().product()
    }

    fn pos(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap_or_else(|| panic!("no factor {name}"))
    }

    fn digits(&self, mut i: usize) -> Vec<usize> {
        let mut d = vec![0; self.dims.len()];
        for p in (0..self.dims.len()).rev() {
            d[p] = i % self.dims[p];
            i /= self.dims[p];
        }
        d
    }
}

fn sub_index(digits: &[usize], pos: &[usize], dims: &[usize]) -> usize {
    pos.iter().fold(0, |acc, &p| acc * dims[p] + digits[p])
}

/// `op` (on `names`, lexicographic) tensored with identity elsewhere.
fn embed(l: &Layout, mat: &M, names: &[&str]) -> M {
    let pos: Vec<usize> = names.iter().map(|n| l.pos(n)).collect();
    let n = l.total();
    let digs: Vec<Vec<usize>> = (0..n).map(|i| l.digits(i)).collect();
    let mut out = M::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let same_rest = (0..l.dims.len()).all(|p| pos.contains(&p) || digs[i][p] == digs[j][p]);
            if same_rest {
                out[(i, j)] = mat[(sub_index(&digs[i], &pos, &l.dims), sub_index(&digs[j], &pos, &l.dims))];
            }
        }
    }
    out
}

fn embed_op(l: &Layout, op: &Operator) -> M {
    embed(l, op.matrix(), &op.names())
}

fn swap(l: &Layout, a: &str, b: &str) -> M {
    let (pa, pb) = (l.pos(a), l.pos(b));
    let n = l.total();
    let mut out = M::zeros(n, n);
    for i in 0..n {
        let mut d = l.digits(i);
        d.swap(pa, pb);
        let j = d.iter().zip(&l.dims).fold(0, |acc, (x, dim)| acc * dim + x);
        out[(j, i)] = Complex64::new(1.0, 0.0);
    }
    out
}

/// Keeps the named factors, in layout order.
fn ptrace(l: &Layout, rho: &M, keep: &[&str]) -> M {
    let mut kp: Vec<usize> = keep.iter().map(|n| l.pos(n)).collect();
    kp.sort();
    let dk: usize = kp.iter().map(|&p| l.dims[p]).product();
    let n = l.total();
    let digs: Vec<Vec<usize>> = (0..n).map(|i| l.digits(i)).collect();
    let mut out = M::zeros(dk, dk);
    for i in 0..n {
        for j in 0..n {
            if (0..l.dims.len()).all(|p| kp.contains(&p) || digs[i][p] == digs[j][p]) {
                out[(sub_index(&digs[i], &kp, &l.dims), sub_index(&digs[j], &kp, &l.dims))] += rho[(i, j)];
            }
        }
    }
    out
}

fn eigvals(h: &M) -> Vec<f64> {
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigen().eigenvalues.iter().copied().collect()
}

fn entropy(rho: &M) -> f64 {
    eigvals(rho).iter().filter(|&&x| x > 1e-13).map(|&x| -x * x.ln()).sum()
}

fn mi(l: &Layout, rho: &M, a: &[&str], b: &[&str]) -> f64 {
    let ab: Vec<&str> = a.iter().chain(b).copied().collect();
    entropy(&ptrace(l, rho, a)) + entropy(&ptrace(l, rho, b)) - entropy(&ptrace(l, rho, &ab))
}

fn energy(rho: &M, h: &M) -> f64 {
    (rho * h).trace().re
}

fn gibbs(h: &M, beta: f64) -> (M, f64) {
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let e = herm.symmetric_eigen();
    let w: Vec<f64> = e.eigenvalues.iter().map(|&x| (-beta * x).exp()).collect();
    let z: f64 = w.iter().sum();
    let d = M::from_diagonal(&nalgebra::DVector::from_iterator(
        w.len(),
        w.iter().map(|&x| Complex64::new(x / z, 0.0)),
    ));
    (&e.eigenvectors * d * e.eigenvectors.adjoint(), z.ln())
}

fn gate_matrix(l: &Layout, g: &Gate) -> M {
    match g {
        Gate::Unitary(u) => embed_op(l, u),
        Gate::Swap(a, b) => swap(l, a, b),
    }
}

fn conj(u: &M, rho: &M) -> M {
    u * rho * u.adjoint()
}

struct Oracle {
    w_ext_a: f64,
    w_in_mk: f64,
    i_go: f64,
    j_go: f64,
    holevo_ak: f64,
    cmi_am_k: f64,
    s_irr_b1: f64,
    s_irr_b2: f64,
    ds_amk_02: f64,
    i_a_mk_4: f64,
    df_a_04: f64,
    df_amk_04: f64,
    p: Vec<f64>,
}

fn oracle(spec: &ProtocolSpec) -> Oracle {
    let beta = spec.beta;
    let mut names: Vec<String> = spec.bath1.registers.iter().map(|r| r.name.clone()).collect();
    let mut dims: Vec<usize> = spec.bath1.registers.iter().map(|r| r.dim).collect();
    for lab in [spec.a_label(), spec.m_label(), spec.k_label()] {
        names.push(lab.name.clone());
        dims.push(lab.dim);
    }
    for r in &spec.bath2.registers {
        names.push(r.name.clone());
        dims.push(r.dim);
    }
    let l = Layout { names, dims };
    let n = l.total();
    let id = M::identity(n, n);
    let one = Complex64::new(1.0, 0.0);
    let nk = spec.n_outcomes();
    let dk = nk;

    let h_b1: M = spec.bath1.terms.iter().fold(M::zeros(n, n), |acc, t| acc + embed_op(&l, t));
    let h_b2: M = spec.bath2.terms.iter().fold(M::zeros(n, n), |acc, t| acc + embed_op(&l, t));
    let h_a: Vec<M> = spec.h_a.iter().map(|h| embed_op(&l, h)).collect();
    let h_mk = embed_op(&l, &spec.h_mk);

    // product initial state as a product of commuting embedded blocks
    let mut rho0 = id.clone();
    let mut ln_z_b1 = 0.0;
    let mut ln_z_b2 = 0.0;
    for (terms, lnz) in [(&spec.bath1.terms, &mut ln_z_b1), (&spec.bath2.terms, &mut ln_z_b2)] {
        for t in terms.iter() {
            let (g, z) = gibbs(t.matrix(), beta);
            rho0 = &rho0 * embed(&l, &g, &t.names());
            *lnz += z;
        }
    }
    let mut k0 = M::zeros(dk, dk);
    k0[(0, 0)] = one;
    rho0 = rho0 * embed_op(&l, &spec.rho0_a) * embed_op(&l, &spec.rho0_m) * embed(&l, &k0, &["K"]);

    let rho1 = conj(&embed_op(&l, &spec.u), &rho0);

    let ins = spec.pointer.instrument().unwrap();
    let mut rho2 = M::zeros(n, n);
    for (k, op) in ins.operations().iter().enumerate() {
        let mut shift = M::zeros(dk, dk);
        shift[(k, 0)] = one;
        let write = embed(&l, &shift, &["K"]);
        for kr in op.kraus() {
            let e = embed_op(&l, kr) * &write;
            rho2 += conj(&e, &rho1);
        }
    }
    let proj = |k: usize| {
        let mut p = M::zeros(dk, dk);
        p[(k, k)] = one;
        embed(&l, &p, &["K"])
    };

    let mut control = M::zeros(n, n);
    for (k, c) in spec.feedback.iter().enumerate() {
        let f = c.gates.iter().fold(id.clone(), |acc, g| gate_matrix(&l, g) * acc);
        control += proj(k) * f;
    }
    let rho3 = conj(&control, &rho2);
    let v = spec.erasure.gates.iter().fold(id.clone(), |acc, g| gate_matrix(&l, g) * acc);
    let rho4 = conj(&v, &rho3);

    let w_ext_a = -(energy(&rho2, &h_a[2]) - energy(&rho0, &h_a[0]))
        - ((energy(&rho3, &h_b1) + energy(&rho3, &h_a[3])) - (energy(&rho2, &h_b1) + energy(&rho2, &h_a[2])));
    let w_in_mk = (energy(&rho2, &h_mk) - energy(&rho0, &h_mk))
        + ((energy(&rho4, &h_mk) + energy(&rho4, &h_b2)) - (energy(&rho3, &h_mk) + energy(&rho3, &h_b2)));

    let b1: Vec<&str> = spec.bath1.names();
    let b2: Vec<&str> = spec.bath2.names();
    let s_a_0 = entropy(spec.rho0_a.matrix());
    let s_m_0 = entropy(spec.rho0_m.matrix());
    let mut p = Vec::new();
    let (mut post_a, mut post_m, mut s_irr_b1) = (0.0, 0.0, 0.0);
    for k in 0..nk {
        let blk = proj(k) * &rho2 * proj(k);
        let pk = blk.trace().re;
        p.push(pk);
        if pk <= 1e-14 {
            continue;
        }
        let blk = blk / Complex64::new(pk, 0.0);
        post_a += pk * entropy(&ptrace(&l, &blk, &["A"]));
        post_m += pk * entropy(&ptrace(&l, &blk, &["M"]));
        // branch after feedback
        let b3 = proj(k) * &rho3 * proj(k) / Complex64::new(pk, 0.0);
        let r_b1 = ptrace(&l, &b3, &b1);
        let hb1_local = ptrace(&l, &(&b3 * &h_b1), &b1).trace().re;
        let d = -entropy(&r_b1) + beta * hb1_local + ln_z_b1;
        s_irr_b1 += pk * (mi(&l, &b3, &["A"], &b1) + d);
    }
    let r_b2 = ptrace(&l, &rho4, &b2);
    let d_b2 = -entropy(&r_b2) + beta * energy(&rho4, &h_b2) + ln_z_b2;
    let s_irr_b2 = mi(&l, &rho4, &["M", "K"], &b2) + d_b2;

    let s_amk_0 = s_a_0 + s_m_0;
    let s_amk_4 = entropy(&ptrace(&l, &rho4, &["A", "M", "K"]));
    let f_a_0 = energy(&rho0, &h_a[0]) - s_a_0 / beta;
    let f_a_4 = energy(&rho4, &h_a[4]) - entropy(&ptrace(&l, &rho4, &["A"])) / beta;
    let f_amk_0 = energy(&rho0, &h_a[0]) + energy(&rho0, &h_mk) - s_amk_0 / beta;
    let f_amk_4 = energy(&rho4, &h_a[4]) + energy(&rho4, &h_mk) - s_amk_4 / beta;

    Oracle {
        w_ext_a,
        w_in_mk,
        i_go: s_a_0 - post_a,
        j_go: s_m_0 - post_m,
        holevo_ak: mi(&l, &rho3, &["A"], &["K"]),
        cmi_am_k: entropy(&ptrace(&l, &rho2, &["A", "K"])) + entropy(&ptrace(&l, &rho2, &["M", "K"]))
            - entropy(&ptrace(&l, &rho2, &["A", "M", "K"]))
            - entropy(&ptrace(&l, &rho2, &["K"])),
        s_irr_b1,
        s_irr_b2,
        ds_amk_02: entropy(&ptrace(&l, &rho2, &["A", "M", "K"])) - s_amk_0,
        i_a_mk_4: mi(&l, &rho4, &["A"], &["M", "K"]),
        df_a_04: f_a_4 - f_a_0,
        df_amk_04: f_amk_4 - f_amk_0,
        p,
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol * want.abs().max(1.0),
        "{name}: library {got} vs dense {want}"
    );
}

fn compare(spec: &ProtocolSpec) {
    let o = oracle(spec);
    let r = evaluate(spec).unwrap();
    let (w, i) = (&r.work, &r.info);
    let tol = 1e-8;
    close("w_ext_a", w.w_ext_a, o.w_ext_a, tol);
    close("w_in_mk", w.w_in_mk, o.w_in_mk, tol);
    close("w_tot", w.w_tot, o.w_ext_a - o.w_in_mk, tol);
    close("i_go", i.i_go, o.i_go, tol);
    close("j_go", i.j_go, o.j_go, tol);
    close("holevo", i.holevo_ak, o.holevo_ak, tol);
    close("cmi", i.cmi_am_k, o.cmi_am_k, tol);
    close("s_irr_b1", i.s_irr_b1, o.s_irr_b1, tol);
    close("s_irr_b2", i.s_irr_b2, o.s_irr_b2, tol);
    close("ds_amk", i.ds_amk_02, o.ds_amk_02, tol);
    close("i_a_mk_4", i.i_a_mk_4, o.i_a_mk_4, tol);
    close("df_a", i.df_a_04, o.df_a_04, tol);
    close("df_amk", i.df_amk_04, o.df_amk_04, tol);
    for (a, b) in r.probabilities.iter().zip(&o.p) {
        close("p_k", *a, *b, 1e-10);
    }

    // the extraction identity on the dense numbers alone
    let rhs = -o.df_a_04 + (o.i_go - o.holevo_ak - o.s_irr_b1) / spec.beta;
    close("dense extraction identity", o.w_ext_a, rhs, 1e-8);
}

fn small(class: PointerClass, erasure: ErasureMode) -> SampleConfig {
    SampleConfig {
        max_dim_a: 2,
        max_dim_m: 2,
        max_outcomes: 2,
        pointer_class: class,
        erasure,
    }
}

#[test]
fn random_protocols_match_dense_simulation() {
    for (s, class) in PointerClass::ALL.iter().cycle().take(12).enumerate() {
        let spec = random_protocol(&small(*class, ErasureMode::Reset), 1000 + s as u64).unwrap();
        compare(&spec);
    }
}

#[test]
fn scrambled_erasure_matches_dense_simulation() {
    for (s, class) in PointerClass::ALL.iter().cycle().take(8).enumerate() {
        let spec = random_protocol(&small(*class, ErasureMode::ScrambleOnly), 2000 + s as u64).unwrap();
        compare(&spec);
    }
}

#[test]
fn qutrit_protocol_matches_dense_simulation() {
    let cfg = SampleConfig {
        max_dim_a: 3,
        max_dim_m: 3,
        max_outcomes: 3,
        pointer_class: PointerClass::Generic,
        erasure: ErasureMode::ScrambleOnly,
    };
    for seed in 0..3 {
        compare(&random_protocol(&cfg, 31 + seed).unwrap());
    }
}
