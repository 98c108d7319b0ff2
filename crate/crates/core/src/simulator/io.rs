//! Snapshot and norm output.
//!
//! Binary snapshot layout (little endian): `n: u64`, `N: u64`, `t: f64`, then
//! the `n × (N + 1)` values row by row (component-major) as `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::forward::Trajectory;
use crate::system::StateField;

/// CSV with header `x,w1,…,wn` and one row per grid node.
pub fn write_snapshot_csv<T: Scalar>(state: &StateField<T>, mut out: impl Write) -> Result<()> {
    let header: Vec<String> = (1..=state.n()).map(|i| format!("w{i}")).collect();
    writeln!(out, "x,{}", header.join(","))?;
    for q in 0..state.nodes() {
        write!(out, "{:.10e}", state.x(q).as_f64())?;
        for i in 0..state.n() {
            write!(out, ",{:.10e}", state.get(i, q).as_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// CSV with header `t,l2_1,…,l2_n,linf_1,…,linf_n`, one row per time step.
pub fn write_norms_csv<T: Scalar>(traj: &Trajectory<T>, mut out: impl Write) -> Result<()> {
    let n = traj.initial().n();
    let l2: Vec<String> = (1..=n).map(|i| format!("l2_{i}")).collect();
    let li: Vec<String> = (1..=n).map(|i| format!("linf_{i}")).collect();
    writeln!(out, "t,{},{}", l2.join(","), li.join(","))?;
    for s in &traj.norms {
        write!(out, "{:.10e}", s.t.as_f64())?;
        for v in s.l2.iter().chain(&s.linf) {
            write!(out, ",{:.10e}", v.as_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_snapshot_binary<T: Scalar>(state: &StateField<T>, mut out: impl Write) -> Result<()> {
    out.write_all(&(state.n() as u64).to_le_bytes())?;
    out.write_all(&(state.cells() as u64).to_le_bytes())?;
    out.write_all(&state.t().as_f64().to_le_bytes())?;
    for v in state.as_slice() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot_binary<T: Scalar>(mut input: impl Read) -> Result<StateField<T>> {
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cells = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let t = f64::from_le_bytes(word);
    if n == 0 || cells == 0 || n.saturating_mul(cells + 1) > (1 << 32) {
        return Err(Error::DimensionMismatch(format!(
            "bad snapshot header n = {n}, N = {cells}"
        )));
    }
    let mut components = vec![Vec::with_capacity(cells + 1); n];
    for comp in components.iter_mut() {
        for _ in 0..=cells {
            input.read_exact(&mut word)?;
            comp.push(T::lit(f64::from_le_bytes(word)));
        }
    }
    Ok(StateField::from_components(components)?.with_t(T::lit(t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let s = StateField::<f64>::from_fn(3, 10, |i, x| (i as f64 + 1.0) * x.sin()).with_t(0.25);
        let mut buf = Vec::new();
        write_snapshot_binary(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 3 * 11);
        let back: StateField<f64> = read_snapshot_binary(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn truncated_binary_is_an_error() {
        let s = StateField::<f64>::zeros(2, 8);
        let mut buf = Vec::new();
        write_snapshot_binary(&s, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_snapshot_binary::<f64>(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_shape() {
        let s = StateField::<f64>::zeros(2, 8);
        let mut buf = Vec::new();
        write_snapshot_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("x,w1,w2\n"));
    }
}
