#![allow(dead_code)]

use molgen::chem::TokenSequence;
use molgen::descriptors::PropertyVector;
use molgen::model::{ModelConfig, SequenceModel};
use molgen::numerics::{SplitMix64, Tape, Tensor, Var};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
/// Entries where both gradients are below this are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn random_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

/// A scalar function of several tensors built on a fresh tape.
pub type Build<'a> = dyn Fn(&mut Tape, &[Var]) -> Var + 'a;

fn eval(build: &Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars);
    tape.value(out).item()
}

/// Largest elementwise relative error between tape gradients and central
/// differences over every input entry.
pub fn check_gradients(build: &Build, inputs: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out);
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let g = grads.get_or_zeros(vars[k], t.shape());
        for j in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[j] -= FD_STEP;
            let numeric = (eval(build, &plus) - eval(build, &minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[j], numeric));
        }
    }
    worst
}

/// Reduces a matrix to a scalar with fixed random weights, so every entry
/// gets a distinct gradient.
pub fn weighted_sum(tape: &mut Tape, x: Var, weights: &Tensor) -> Var {
    let w = tape.leaf(weights.clone());
    let prod = tape.mul(x, w).unwrap();
    tape.sum(prod)
}

pub struct Micro {
    pub model: SequenceModel,
    pub seqs: Vec<TokenSequence>,
    pub conds: Vec<PropertyVector>,
    pub noise: Tensor,
    pub beta: f64,
}

/// A tiny conditional model with random weights (including the decoder
/// output layer), two or three random sequences and partially masked
/// conditions.
pub fn micro_instance(seed: u64) -> Micro {
    let mut rng = SplitMix64::new(seed);
    let vocab = rng.random_range(5..8);
    let k = rng.random_range(1..3);
    let config = ModelConfig {
        vocab_size: vocab,
        embed_dim: rng.random_range(2..4),
        latent_dim: rng.random_range(1..3),
        condition_dim: k,
        window: rng.random_range(1..3),
        hidden_dim: rng.random_range(2..5),
        conditional: true,
        seed,
    };
    let latent = config.latent_dim;
    let mut model = SequenceModel::new(config).unwrap();
    for t in model.params_mut().tensors_mut() {
        for x in t.data_mut() {
            *x = rng.random_range(-0.8..0.8);
        }
    }
    let batch = rng.random_range(2..4);
    let seqs = (0..batch)
        .map(|_| {
            let len = rng.random_range(1..5);
            let mut ids = vec![1u32];
            ids.extend((0..len).map(|_| rng.random_range(3..vocab as u32)));
            ids.push(2);
            TokenSequence { ids }
        })
        .collect();
    let conds = (0..batch)
        .map(|_| {
            let mut v = PropertyVector::full((0..k).map(|_| rng.random_range(-2.0..2.0)).collect());
            for j in 0..k {
                if rng.random_bool(0.3) {
                    v.mask[j] = false;
                    v.values[j] = 0.0;
                }
            }
            v
        })
        .collect();
    let noise = random_tensor(&mut rng, batch, latent, 1.5);
    let beta = rng.random_range(0.1..1.0);
    Micro {
        model,
        seqs,
        conds,
        noise,
        beta,
    }
}

fn micro_loss(m: &Micro) -> f64 {
    let seqs: Vec<&TokenSequence> = m.seqs.iter().collect();
    let conds: Vec<&PropertyVector> = m.conds.iter().collect();
    m.model.loss_and_grads(&seqs, &conds, Some(&m.noise), m.beta).unwrap().0
}

/// Largest relative error of the full negated-ELBO gradient over every
/// model parameter.
pub fn check_elbo_gradients(m: &mut Micro) -> f64 {
    let seqs: Vec<&TokenSequence> = m.seqs.iter().collect();
    let conds: Vec<&PropertyVector> = m.conds.iter().collect();
    let (_, _, _, grads) = m.model.loss_and_grads(&seqs, &conds, Some(&m.noise), m.beta).unwrap();
    let mut worst: f64 = 0.0;
    for (k, g) in grads.iter().enumerate() {
        for j in 0..g.len() {
            let orig = m.model.params().tensors()[k].data()[j];
            m.model.params_mut().tensors_mut()[k].data_mut()[j] = orig + FD_STEP;
            let plus = micro_loss(m);
            m.model.params_mut().tensors_mut()[k].data_mut()[j] = orig - FD_STEP;
            let minus = micro_loss(m);
            m.model.params_mut().tensors_mut()[k].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[j], numeric));
        }
    }
    worst
}

/// Every differentiable tape op and loss, each as a scalar function of
/// random inputs drawn for `seed`.
pub fn op_cases(seed: u64) -> Vec<(&'static str, Box<Build<'static>>, Vec<Tensor>)> {
    let mut rng = SplitMix64::new(seed);
    let r = rng.random_range(1..4);
    let c = rng.random_range(1..4);
    let m = rng.random_range(1..4);
    let a = random_tensor(&mut rng, r, c, 1.0);
    let b = random_tensor(&mut rng, r, c, 1.0);
    let bt = random_tensor(&mut rng, c, m, 1.0);
    let row = random_tensor(&mut rng, 1, c, 1.0);
    let w_rc = random_tensor(&mut rng, r, c, 1.0);
    let w_rm = random_tensor(&mut rng, r, m, 1.0);
    let w_cr = random_tensor(&mut rng, c, r, 1.0);
    let w_cat = random_tensor(&mut rng, r, 2 * c, 1.0);
    let s = random_tensor(&mut rng, 1, 1, 1.0);
    let vocab = c + 1;
    let table = random_tensor(&mut rng, vocab, m, 1.0);
    let ids: Vec<usize> = (0..r + 1).map(|_| rng.random_range(0..vocab)).collect();
    let w_emb = random_tensor(&mut rng, ids.len(), m, 1.0);
    let targets: Vec<usize> = (0..r).map(|_| rng.random_range(0..c)).collect();
    let noise = random_tensor(&mut rng, r, c, 1.0);
    let pairs = rng.random_range(2..4);
    let zs = random_tensor(&mut rng, pairs, c + 1, 1.0);
    let zp = random_tensor(&mut rng, pairs, c + 1, 1.0);
    let raw = Tensor::scalar(rng.random_range(0.0..4.0));
    let beta = rng.random_range(0.1..2.0);
    let cst = rng.random_range(-1.0..1.0);
    let cap = a.data().iter().sum::<f64>() / a.len() as f64 + 0.123;

    let w1 = w_rc.clone();
    let w2 = w_rc.clone();
    let w3 = w_rc.clone();
    let w4 = w_rc.clone();
    let w5 = w_rc.clone();
    let w6 = w_rc.clone();
    let w7 = w_rc.clone();
    let w8 = w_rc.clone();
    let w9 = w_rc.clone();
    let w10 = w_rc.clone();
    let w11 = w_rc.clone();
    let w12 = w_rc.clone();
    let w13 = w_rc.clone();
    let w14 = w_rc.clone();
    let tg = targets.clone();
    let nz = noise.clone();

    let cases: Vec<(&'static str, Box<Build<'static>>, Vec<Tensor>)> = vec![
        ("add", Box::new(move |t, v| {
            let x = t.add(v[0], v[1]).unwrap();
            weighted_sum(t, x, &w1)
        }), vec![a.clone(), b.clone()]),
        ("sub", Box::new(move |t, v| {
            let x = t.sub(v[0], v[1]).unwrap();
            weighted_sum(t, x, &w2)
        }), vec![a.clone(), b.clone()]),
        ("mul", Box::new(move |t, v| {
            let x = t.mul(v[0], v[1]).unwrap();
            weighted_sum(t, x, &w3)
        }), vec![a.clone(), b.clone()]),
        ("matmul", Box::new(move |t, v| {
            let x = t.matmul(v[0], v[1]).unwrap();
            weighted_sum(t, x, &w_rm)
        }), vec![a.clone(), bt.clone()]),
        ("transpose", Box::new(move |t, v| {
            let x = t.transpose(v[0]).unwrap();
            weighted_sum(t, x, &w_cr)
        }), vec![a.clone()]),
        ("add_row", Box::new(move |t, v| {
            let x = t.add_row(v[0], v[1]).unwrap();
            weighted_sum(t, x, &w4)
        }), vec![a.clone(), row.clone()]),
        ("tanh", Box::new(move |t, v| {
            let x = t.tanh(v[0]);
            weighted_sum(t, x, &w5)
        }), vec![a.clone()]),
        ("exp", Box::new(move |t, v| {
            let x = t.exp(v[0]);
            weighted_sum(t, x, &w6)
        }), vec![a.clone()]),
        ("square", Box::new(move |t, v| {
            let x = t.square(v[0]);
            weighted_sum(t, x, &w7)
        }), vec![a.clone()]),
        ("scale", Box::new(move |t, v| {
            let x = t.scale(v[0], cst);
            weighted_sum(t, x, &w8)
        }), vec![a.clone()]),
        ("scale_by", Box::new(move |t, v| {
            let x = t.scale_by(v[0], v[1]).unwrap();
            weighted_sum(t, x, &w9)
        }), vec![a.clone(), s.clone()]),
        ("add_scalar", Box::new(move |t, v| {
            let x = t.add_scalar(v[0], cst);
            weighted_sum(t, x, &w10)
        }), vec![a.clone()]),
        ("clamp_max", Box::new(move |t, v| {
            let x = t.clamp_max(v[0], cap);
            weighted_sum(t, x, &w11)
        }), vec![a.clone()]),
        ("sum", Box::new(move |t, v| {
            let x = t.square(v[0]);
            t.sum(x)
        }), vec![a.clone()]),
        ("mean", Box::new(move |t, v| {
            let x = t.square(v[0]);
            t.mean(x)
        }), vec![a.clone()]),
        ("softmax", Box::new(move |t, v| {
            let x = t.softmax(v[0]).unwrap();
            weighted_sum(t, x, &w12)
        }), vec![a.clone()]),
        ("log_softmax", Box::new(move |t, v| {
            let x = t.log_softmax(v[0]).unwrap();
            weighted_sum(t, x, &w13)
        }), vec![a.clone()]),
        ("concat", Box::new(move |t, v| {
            let x = t.concat(&[v[0], v[1]]).unwrap();
            weighted_sum(t, x, &w_cat)
        }), vec![a.clone(), b.clone()]),
        ("embedding", Box::new(move |t, v| {
            let x = t.embedding(v[0], &ids).unwrap();
            weighted_sum(t, x, &w_emb)
        }), vec![table]),
        ("cross_entropy", Box::new(move |t, v| t.cross_entropy(v[0], &tg).unwrap()), vec![a.clone()]),
        ("row_normalize", Box::new(move |t, v| {
            let x = t.row_normalize(v[0]).unwrap();
            weighted_sum(t, x, &w14)
        }), vec![a.clone()]),
        ("kl", Box::new(|t, v| molgen::numerics::kl_to_standard_normal(t, v[0], v[1]).unwrap()), vec![a.clone(), b.clone()]),
        ("reparameterize", Box::new(move |t, v| {
            let z = molgen::numerics::reparameterize(t, v[0], v[1], &nz).unwrap();
            weighted_sum(t, z, &w_rc)
        }), vec![a.clone(), b.clone()]),
        ("elbo", Box::new(move |t, v| {
            let recon = t.cross_entropy(v[0], &targets).unwrap();
            let kl = molgen::numerics::kl_to_standard_normal(t, v[1], v[2]).unwrap();
            molgen::numerics::elbo(t, recon, kl, beta).unwrap()
        }), vec![a.clone(), b.clone(), noise.clone()]),
        ("info_nce", Box::new(|t, v| molgen::numerics::info_nce(t, v[0], v[1], v[2]).unwrap()), vec![zs, zp, raw]),
    ];
    cases
}

/// Full-matrix edit distance over chars.
pub fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn random_word<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    let n = rng.random_range(0..=max_len);
    (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// Smallest set of highest-probability tokens (ties broken by lower id)
/// whose mass reaches `p`, found by checking every prefix length of the
/// sorted order from the shortest up.
pub fn top_p_oracle(probs: &[f64], p: f64) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    ids.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    for len in 1..=ids.len() {
        let mass: f64 = ids[..len].iter().map(|&i| probs[i]).sum();
        if mass >= p {
            return ids[..len].to_vec();
        }
    }
    ids
}

/// Random distribution with occasional exact ties and zeros.
pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let levels = [0.0, 1.0, 2.0, 3.0];
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                levels[rng.random_range(0..levels.len())]
            } else {
                rng.random_range(0.0..5.0)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Distinct atom sets matching `pat`, by trying every ordered tuple of
/// distinct heavy atoms.
pub fn match_sets_oracle(mol: &molgen::chem::Molecule, pat: &molgen::analysis::SubstructurePattern) -> std::collections::HashSet<Vec<usize>> {
    use molgen::analysis::{Aromaticity, ElementClass, RingConstraint};
    use molgen::chem::Element;
    let atom_ok = |q: usize, i: usize| {
        let query = &pat.atoms[q];
        let a = mol.atom(i);
        if a.element == Element::H || a.element == Element::Dummy {
            return false;
        }
        let e = match query.class {
            ElementClass::Is(el) => a.element == el,
            ElementClass::Halogen => matches!(a.element, Element::F | Element::Cl | Element::Br | Element::I),
            ElementClass::Any => true,
        };
        let ar = match query.aromaticity {
            Aromaticity::Aliphatic => !a.aromatic,
            Aromaticity::Aromatic => a.aromatic,
            Aromaticity::Either => true,
        };
        let ring = match query.ring {
            RingConstraint::None => true,
            RingConstraint::Ring => ring_atom_oracle(mol, i),
            RingConstraint::Chain => !ring_atom_oracle(mol, i),
        };
        e && ar && ring
    };
    let m = pat.atoms.len();
    let n = mol.atom_count();
    let mut found = std::collections::HashSet::new();
    let mut tuple = vec![0usize; m];
    fn rec(
        depth: usize,
        n: usize,
        tuple: &mut Vec<usize>,
        found: &mut std::collections::HashSet<Vec<usize>>,
        ok: &dyn Fn(&[usize]) -> bool,
    ) {
        if depth == tuple.len() {
            if ok(tuple) {
                let mut s = tuple.clone();
                s.sort_unstable();
                found.insert(s);
            }
            return;
        }
        for i in 0..n {
            if tuple[..depth].contains(&i) {
                continue;
            }
            tuple[depth] = i;
            rec(depth + 1, n, tuple, found, ok);
        }
    }
    let full = |t: &[usize]| {
        (0..m).all(|q| atom_ok(q, t[q]))
            && pat.bonds.iter().all(|b| {
                mol.bonds().iter().enumerate().any(|(k, bond)| {
                    let (x, y) = (t[b.a], t[b.b]);
                    ((bond.a == x && bond.b == y) || (bond.a == y && bond.b == x))
                        && b.order.is_none_or(|o| bond.order == o)
                        && (!b.ring || ring_bond_oracle(mol, k))
                })
            })
    };
    rec(0, n, &mut tuple, &mut found, &full);
    found
}

/// A bond is in a ring when its endpoints stay connected without it.
pub fn ring_bond_oracle(mol: &molgen::chem::Molecule, k: usize) -> bool {
    let skip = &mol.bonds()[k];
    let mut seen = vec![false; mol.atom_count()];
    let mut stack = vec![skip.a];
    seen[skip.a] = true;
    while let Some(x) = stack.pop() {
        for (j, b) in mol.bonds().iter().enumerate() {
            if j == k {
                continue;
            }
            let y = if b.a == x {
                b.b
            } else if b.b == x {
                b.a
            } else {
                continue;
            };
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen[skip.b]
}

pub fn ring_atom_oracle(mol: &molgen::chem::Molecule, i: usize) -> bool {
    mol.bonds()
        .iter()
        .enumerate()
        .any(|(k, b)| (b.a == i || b.b == i) && ring_bond_oracle(mol, k))
}

/// Mean of `1 − Tanimoto` over every ordered pair of distinct items, from
/// explicit bit lists.
pub fn intdiv_oracle(fps: &[molgen::fingerprints::Fingerprint]) -> f64 {
    let bits: Vec<std::collections::HashSet<usize>> = fps.iter().map(|f| f.ones().into_iter().collect()).collect();
    let n = bits.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let inter = bits[i].intersection(&bits[j]).count() as f64;
            let union = bits[i].union(&bits[j]).count() as f64;
            let t = if union == 0.0 { 1.0 } else { inter / union };
            total += 1.0 - t;
        }
    }
    total / (n * (n - 1)) as f64
}

/// Pearson chi-square statistic and its upper-tail p-value against
/// expected probabilities (every expected cell positive).
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len() as f64 - 1.0;
    if dof < 1.0 {
        return (stat, 1.0);
    }
    (stat, ChiSquared::new(dof).unwrap().sf(stat))
}
