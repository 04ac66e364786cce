//! Deterministic CSV emission. Identical (config, seed) runs must produce
//! byte-identical files, so every row is formatted from pure run data: no
//! timestamps, no float formatting that depends on locale, empty cells for
//! not-applicable values.

pub const HISTORY_HEADER: &str = "run_id,iteration,instance_id,view,eta_hat,exchange_direction,demos,dropped,beta_hat,delta_hat_1,delta_hat_2,eps_i_max,zeta_i_min,b_max,epsilon_a";
pub const HISTORY_SCHEMA: &str = "# cotrain history schema v1";

pub const DIAGNOSTICS_HEADER: &str = "run_id,iteration,instance_id,alpha_hat_a,alpha_hat_b,beta_hat_a_d1,beta_hat_b_d2,delta_hat_1,delta_hat_2,eps_hat_a_d,eps_hat_b_d,eps_hat_a_d1,eps_hat_b_d2,applicable,penalty_a,penalty_b";
pub const DIAGNOSTICS_SCHEMA: &str = "# cotrain diagnostics schema v1";

pub const EVALUATION_HEADER: &str =
    "run_id,instance_id,reward_a,reward_b,reward_final,final_view,epsilon_a,b_max,bound_valid";
pub const EVALUATION_SCHEMA: &str = "# cotrain evaluation schema v1";

pub const BOUND_HEADER: &str = "run_id,instance_id,action,n_b,eps_i,zeta_i,b_i,defined,valid";
pub const BOUND_SCHEMA: &str = "# cotrain bound report schema v1";

/// Finite floats print with Rust's shortest round-trip formatting; anything
/// else (including absent values) is an empty cell.
pub fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => String::new(),
    }
}

pub fn cell_bool(value: Option<bool>) -> String {
    match value {
        Some(true) => "true".into(),
        Some(false) => "false".into(),
        None => String::new(),
    }
}

pub struct CsvFile {
    lines: Vec<String>,
}

impl CsvFile {
    pub fn new(schema: &str, header: &str) -> Self {
        CsvFile {
            lines: vec![schema.to_string(), header.to_string()],
        }
    }

    pub fn push_row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn contents(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    pub fn write(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, self.contents())
    }
}
