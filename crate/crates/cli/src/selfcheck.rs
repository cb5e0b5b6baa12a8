//! Fixed table of special-function reference values, checked on demand.

use fracsde_core::paths::make_grid;
use fracsde_core::specfun::{
    gamma_argmin, gamma_eval, inv_gamma_diff, kernel_l2_diff, kernel_weights, singular_quad,
    KernelKind,
};

pub struct CheckRow {
    pub name: &'static str,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn ok(&self) -> bool {
        (self.value - self.reference).abs() <= self.tolerance
    }
}

pub struct SelfcheckReport {
    pub rows: Vec<CheckRow>,
}

impl SelfcheckReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(CheckRow::ok)
    }
}

/// Evaluate the fixed reference table.
pub fn run() -> SelfcheckReport {
    let mut rows = Vec::new();
    let mut push = |name: &'static str, value: f64, reference: f64, tolerance: f64| {
        rows.push(CheckRow {
            name,
            value,
            reference,
            tolerance,
        });
    };

    let g1 = gamma_eval(1.0).expect("gamma(1)");
    push("gamma(1)", g1.value, 1.0, 1e-13);
    push(
        "gamma(2)",
        gamma_eval(2.0).expect("gamma(2)").value,
        1.0,
        1e-13,
    );
    push(
        "gamma(0.75)",
        gamma_eval(0.75).expect("gamma(0.75)").value,
        1.2254167024651776,
        1e-12,
    );
    push("gamma_d1(1)", g1.d1, -0.5772156649015329, 1e-12);

    let argmin = gamma_argmin();
    push("gamma_argmin", argmin, 1.4616321449683623, 1e-8);
    push(
        "gamma_d1(argmin)",
        gamma_eval(argmin).expect("gamma(argmin)").d1,
        0.0,
        1e-12,
    );

    let inv = inv_gamma_diff(0.8, 0.9).expect("inv_gamma_diff");
    let ga = gamma_eval(0.8).expect("gamma(0.8)").value;
    let gb = gamma_eval(0.9).expect("gamma(0.9)").value;
    push(
        "inv_gamma_diff(0.8,0.9)",
        inv.lhs,
        (gb - ga).abs() / (ga * gb),
        1e-14,
    );

    push(
        "kernel_l2_diff(1,0.75,1)",
        kernel_l2_diff(1.0, 0.75, 1.0).expect("kernel_l2_diff"),
        1.0 / 3.0,
        1e-13,
    );

    push(
        "quad(1, (0,1))",
        singular_quad(|_| 1.0, 1.0, 1e-12).expect("quad const"),
        1.0,
        1e-11,
    );
    push(
        "quad(u^{-1/2}, (0,1))",
        singular_quad(|u| u.powf(-0.5), 1.0, 1e-12).expect("quad sqrt"),
        2.0,
        1e-10,
    );
    push(
        "quad(ln^2 u, (0,1))",
        singular_quad(|u| u.ln() * u.ln(), 1.0, 1e-12).expect("quad log2"),
        2.0,
        1e-10,
    );

    let grid = make_grid(1.0, 4).expect("grid");
    let w = kernel_weights(0.75, &grid, KernelKind::Plain).expect("plain weights");
    let t3 = grid.node(3);
    push(
        "plain_row_sum(k=3, a=0.75)",
        w.row_sum(3),
        t3.powf(0.75) / 0.75,
        1e-13,
    );
    let w1 = kernel_weights(1.0, &grid, KernelKind::Plain).expect("order-1 weights");
    push("plain_weight(a=1)", w1.weight(2, 1), grid.step_size(), 0.0);
    let single = make_grid(0.25, 1).expect("single-cell grid");
    let wlog = kernel_weights(0.75, &single, KernelKind::Log).expect("log weights");
    let h = single.step_size();
    push(
        "log_weight_single_cell(a=0.75)",
        wlog.weight(1, 0),
        h.powf(0.75) * (h.ln() - 1.0 / 0.75) / 0.75,
        1e-14,
    );

    SelfcheckReport { rows }
}

/// Print the table to stdout; returns whether every row is in tolerance.
pub fn print() -> bool {
    let report = run();
    println!(
        "{:<28} {:>24} {:>24} {:>10} {:>6}",
        "quantity", "value", "reference", "abs_err", "status"
    );
    for row in &report.rows {
        println!(
            "{:<28} {:>24.16e} {:>24.16e} {:>10.2e} {:>6}",
            row.name,
            row.value,
            row.reference,
            (row.value - row.reference).abs(),
            if row.ok() { "ok" } else { "FAIL" }
        );
    }
    report.all_ok()
}
