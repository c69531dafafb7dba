//! Artifact emission: trajectory and rate-table CSV (shortest round-trip
//! float formatting), the run manifest, and the gnuplot script.

use serde::Serialize;
use sha2::{Digest, Sha256};

use elastica_mle::experiments::RateTable;
use elastica_mle::{SystemConfig, TrajectoryBundle};

pub const TRAJECTORY_HEADER: &str = "step,time,particle,coord,value";

/// Shortest decimal representation that parses back to the identical f64;
/// Rust's `Display` for floats guarantees this.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Written next to every output set; `config_digest` is the SHA-256 of the
/// emitted resolved-config bytes, so the provenance of any data file can be
/// checked against the config that sits beside it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub subcommand: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_iso() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

/// One row per scalar state, step-major then particle then coordinate.
pub fn trajectory_csv(bundle: &TrajectoryBundle) -> String {
    let config = bundle.config();
    let (n, d) = (config.n_particles(), config.dim());
    let mut out = String::with_capacity((config.n_steps() + 1) * n * d * 24);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..=config.n_steps() {
        let time = format_float(bundle.times()[k]);
        let states = bundle.states_at(k);
        for i in 0..n {
            for j in 0..d {
                out.push_str(&format!("{k},{time},{i},{j},{}\n", format_float(states[i * d + j])));
            }
        }
    }
    out
}

/// Same schema for the noise increments (steps 0..n_steps−1), if stored.
pub fn noise_csv(bundle: &TrajectoryBundle) -> Option<String> {
    if !bundle.has_noise() {
        return None;
    }
    let config = bundle.config();
    let (n, d) = (config.n_particles(), config.dim());
    let mut out = String::with_capacity(config.n_steps() * n * d * 24);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..config.n_steps() {
        let time = format_float(bundle.times()[k]);
        let noise = bundle.noise_at(k).expect("checked has_noise");
        for i in 0..n {
            for j in 0..d {
                out.push_str(&format!("{k},{time},{i},{j},{}\n", format_float(noise[i * d + j])));
            }
        }
    }
    Some(out)
}

/// Parse a trajectory CSV back into `(times, states)` for the given system.
/// Rows must appear in canonical order; indices and counts are all checked
/// so a file from a different configuration cannot be estimated silently.
pub fn parse_trajectory_csv(
    text: &str,
    config: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>), String> {
    let (n, d, steps) = (config.n_particles(), config.dim(), config.n_steps());
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == TRAJECTORY_HEADER => {}
        other => {
            return Err(format!(
                "trajectory file must start with header '{TRAJECTORY_HEADER}', got {other:?}"
            ))
        }
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity((steps + 1) * n * d);
    let mut row_no = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next_field = |name: &str| {
            fields.next().ok_or_else(|| format!("row {row_no}: missing field {name}"))
        };
        let step: usize = next_field("step")?
            .parse()
            .map_err(|e| format!("row {row_no}: bad step: {e}"))?;
        let time: f64 = next_field("time")?
            .parse()
            .map_err(|e| format!("row {row_no}: bad time: {e}"))?;
        let particle: usize = next_field("particle")?
            .parse()
            .map_err(|e| format!("row {row_no}: bad particle: {e}"))?;
        let coord: usize = next_field("coord")?
            .parse()
            .map_err(|e| format!("row {row_no}: bad coord: {e}"))?;
        let value: f64 = next_field("value")?
            .parse()
            .map_err(|e| format!("row {row_no}: bad value: {e}"))?;

        let expect_step = row_no / (n * d);
        let expect_particle = (row_no / d) % n;
        let expect_coord = row_no % d;
        if (step, particle, coord) != (expect_step, expect_particle, expect_coord) {
            return Err(format!(
                "row {row_no}: expected (step,particle,coord) = ({expect_step},{expect_particle},{expect_coord}), got ({step},{particle},{coord}); \
                 the file does not match the configured system (N={n}, d={d})"
            ));
        }
        if particle == 0 && coord == 0 {
            times.push(time);
        }
        states.push(value);
        row_no += 1;
    }
    let expected_rows = (steps + 1) * n * d;
    if row_no != expected_rows {
        return Err(format!(
            "trajectory has {row_no} data rows, expected {expected_rows} for N={n}, d={d}, {steps} steps"
        ));
    }
    Ok((times, states))
}

pub const RATE_TABLE_HEADER: &str =
    "n,t,nt,n_replicates,median_error,q90_error,mean_error,theory_bound";

pub fn rate_table_csv(table: &RateTable) -> String {
    let mut out = String::new();
    out.push_str(RATE_TABLE_HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            format_float(r.t),
            format_float(r.nt),
            r.n_replicates,
            format_float(r.median_error),
            format_float(r.q90_error),
            format_float(r.mean_error),
            format_float(r.theory_bound),
        ));
    }
    out
}

/// Log-log plot of the measured error quantiles against N·t with the
/// theoretical bound overlaid; gnuplot keeps plotting dependency-free.
pub fn rate_plot_script(csv_name: &str, slope: f64, intercept: f64) -> String {
    format!(
        "# gnuplot script — run from the directory containing {csv_name}\n\
         set datafile separator \",\"\n\
         set logscale xy\n\
         set xlabel \"N t\"\n\
         set ylabel \"spectral error\"\n\
         set key left bottom\n\
         fit_line(x) = exp({intercept}) * x**({slope})\n\
         plot \"{csv_name}\" skip 1 using 3:5 with linespoints title \"median error\", \\\n\
         \x20    \"{csv_name}\" skip 1 using 3:6 with points title \"q90 error\", \\\n\
         \x20    \"{csv_name}\" skip 1 using 3:8 with lines title \"theoretical bound\", \\\n\
         \x20    fit_line(x) with lines dashtype 2 title sprintf(\"fit, slope %.3f\", {slope})\n"
    )
}
