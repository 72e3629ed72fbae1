//! Fast paths against the brute-force references, one verdict per line.

use starkprobe::eigensolve::{self, SolverOptions};
use starkprobe::metrology::{self, FisherOptions};
use starkprobe::oracle::{self, DenseReference};
use starkprobe::{Eta, ProbeParams, Result, SectorOperator};

pub struct Line {
    pub pass: bool,
    pub text: String,
}

pub fn standard_etas() -> Vec<Eta> {
    [0.0, 0.5, 1.0, 2.0, 5.0]
        .into_iter()
        .map(Eta::Finite)
        .chain([Eta::Infinite])
        .collect()
}

fn line(pass: bool, text: String) -> Line {
    Line { pass, text }
}

pub fn run(etas: &[Eta], max_sites: usize) -> Result<Vec<Line>> {
    let mut out = Vec::new();
    let max_sites = max_sites.clamp(2, oracle::MAX_ORACLE_SITES);

    for &eta in etas {
        let (mut worst, mut commutator) = (0.0f64, 0.0f64);
        for l in 2..=max_sites {
            let reference = DenseReference::new(&ProbeParams::unit(l, 0, eta, 0.37)?)?;
            commutator = commutator.max(reference.sz_commutator_norm());
            for n in 0..=l {
                let op = SectorOperator::build(ProbeParams::unit(l, n, eta, 0.37)?)?;
                let diff = (op.dense_matrix()? - reference.sector_block(n)).abs().max();
                worst = worst.max(diff);
            }
        }
        out.push(line(
            worst == 0.0 && commutator == 0.0,
            format!("sector blocks eta={eta} L<={max_sites}: max |diff| = {worst:e}, |[H,Sz]| = {commutator:e}"),
        ));
    }

    let fisher = FisherOptions::default();
    let solver = SolverOptions::default();
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..20 {
        let h = 0.05 + 0.25 * k as f64;
        let p = ProbeParams::unit(2, 1, Eta::Finite(1.0), h)?;
        let sol = eigensolve::ground_state(&SectorOperator::build(p)?, &solver, true)?;
        let root = (4.0 + h * h).sqrt();
        let de = (sol.energy0 - (-1.0 - root))
            .abs()
            .max((sol.gap().unwrap_or(f64::NAN) - 2.0 * root).abs());
        let point = metrology::qfi(&p, &fisher)?;
        let exact = metrology::two_level_qfi(1.0, h);
        let rel = ((point.qfi - exact) / exact)
            .abs()
            .max(((point.cfi.unwrap_or(f64::NAN) - exact) / exact).abs());
        worst = (worst.0.max(de), worst.1.max(rel));
    }
    out.push(line(
        worst.0 <= 1e-8 && worst.1 <= 1e-4,
        format!(
            "two-level closed form, 20 fields: energy err {:e}, Fisher rel err {:e}",
            worst.0, worst.1
        ),
    ));

    let l = max_sites.min(8);
    for &eta in etas {
        for h in [0.05, 0.3, 1.0] {
            let p = ProbeParams::unit(l, l / 2, eta, h)?;
            let fast = metrology::qfi(&p, &fisher)?.qfi;
            let slow = oracle::qfi_by_differentiation(&p, 1e-4 * h.max(1e-2))?;
            let rel = ((fast - slow) / slow).abs();
            out.push(line(
                rel <= 5e-3,
                format!("QFI eta={eta} L={l} h={h}: overlap {fast:.8e} vs derivative {slow:.8e} (rel {rel:.1e})"),
            ));
        }
    }
    Ok(out)
}
