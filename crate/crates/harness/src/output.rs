use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::experiment::CellResult;
use crate::HarnessError;

/// Smallest value written to log-scale plot data.
pub const PLOT_FLOOR: f64 = 1e-300;

/// Writes `contents` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| HarnessError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Writes `<stem>.err.dat` (t vs error, floored) and `<stem>.b.dat` (t vs
/// `b_t`) per cell, and a gnuplot script stub `plot.gp` referencing them.
pub fn emit_plot_data(cells: &[CellResult], dir: &Path) -> Result<(), HarnessError> {
    if cells.is_empty() {
        return Err(HarnessError::config("no traces to plot"));
    }
    ensure_dir(dir)?;
    let mut script = String::from(
        "set terminal pngcairo size 1200,500\nset output 'plot.png'\nset multiplot layout 1,2\n\
         set logscale y\nset xlabel 't'\nset ylabel 'error'\n",
    );
    let mut err_plots = Vec::new();
    let mut b_plots = Vec::new();
    for c in cells {
        let stem = c.stem();
        let tr = &c.trace;
        let mut err = String::new();
        let mut b = format!("0 {:e}\n", tr.meta.b0);
        for r in &tr.records {
            let _ = writeln!(err, "{} {:e}", r.t, floor(r.metric()));
            let _ = writeln!(b, "{} {:e}", r.t + 1, r.b);
        }
        if !tr.diverged {
            let f = &tr.final_state;
            let _ = writeln!(err, "{} {:e}", f.t, floor(f.metric()));
        }
        write_atomic(&dir.join(format!("{stem}.err.dat")), err.as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.b.dat")), b.as_bytes())?;
        err_plots.push(format!("'{stem}.err.dat' with lines title '{stem}'"));
        b_plots.push(format!("'{stem}.b.dat' with lines title '{stem}'"));
    }
    let _ = writeln!(script, "plot {}", err_plots.join(", \\\n     "));
    script.push_str("unset logscale y\nset ylabel 'b_t'\n");
    let _ = writeln!(script, "plot {}", b_plots.join(", \\\n     "));
    script.push_str("unset multiplot\n");
    write_atomic(&dir.join("plot.gp"), script.as_bytes())
}

fn floor(v: f64) -> f64 {
    if v.is_nan() {
        v
    } else {
        v.max(PLOT_FLOOR)
    }
}
