use std::io::{self, Write};

use super::Dynamics;

/// Derived per-step series stored alongside a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    V,
    W,
    Vsigma,
    Residual,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::V => "V",
            Channel::W => "W",
            Channel::Vsigma => "Vsigma",
            Channel::Residual => "residual",
        }
    }

    const ALL: [Channel; 4] = [Channel::V, Channel::W, Channel::Vsigma, Channel::Residual];
}

/// States, recorded inputs and outputs on the uniform grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    state_names: Vec<String>,
    input_names: Vec<String>,
    output_names: Vec<String>,
    states: Vec<f64>,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    channels: [Option<Vec<f64>>; 4],
}

impl Trajectory {
    pub(crate) fn new(
        dt: f64,
        state_names: Vec<String>,
        input_names: Vec<String>,
        output_names: Vec<String>,
        capacity: usize,
    ) -> Self {
        Self {
            dt,
            states: Vec::with_capacity(capacity * state_names.len()),
            inputs: Vec::with_capacity(capacity * input_names.len()),
            outputs: Vec::with_capacity(capacity * output_names.len()),
            state_names,
            input_names,
            output_names,
            channels: Default::default(),
        }
    }

    /// Append one grid point; returns false (recording nothing) when any
    /// recorded value is non-finite.
    pub(crate) fn push(&mut self, sys: &dyn Dynamics, x: &[f64], u: &[f64]) -> bool {
        let mut rec = vec![0.0; self.input_names.len()];
        sys.recorded_input(x, u, &mut rec);
        let mut y = vec![0.0; self.output_names.len()];
        sys.output(x, &mut y);
        if x.iter().chain(&rec).chain(&y).any(|v| !v.is_finite()) {
            return false;
        }
        self.states.extend_from_slice(x);
        self.inputs.extend_from_slice(&rec);
        self.outputs.extend_from_slice(&y);
        true
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        if self.state_names.is_empty() {
            0
        } else {
            self.states.len() / self.state_names.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let n = self.state_names.len();
        &self.states[k * n..(k + 1) * n]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        let n = self.input_names.len();
        &self.inputs[k * n..(k + 1) * n]
    }

    pub fn output(&self, k: usize) -> &[f64] {
        let n = self.output_names.len();
        &self.outputs[k * n..(k + 1) * n]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.state_names.len().max(1))
    }

    pub fn channel(&self, c: Channel) -> Option<&[f64]> {
        self.channels[c as usize].as_deref()
    }

    /// Attach a per-step series. Panics if the length differs from [`Self::len`].
    pub fn set_channel(&mut self, c: Channel, values: Vec<f64>) {
        assert_eq!(values.len(), self.len(), "channel {} has the wrong length", c.name());
        self.channels[c as usize] = Some(values);
    }

    /// Evaluate `f` on every state and attach the result.
    pub fn record_channel(&mut self, c: Channel, f: impl Fn(&[f64]) -> f64) {
        let values = self.states().map(f).collect();
        self.set_channel(c, values);
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend(self.state_names.iter().cloned());
        cols.extend(self.input_names.iter().cloned());
        for c in Channel::ALL {
            if self.channel(c).is_some() {
                cols.push(c.name().to_string());
            }
        }
        cols.join(",")
    }

    /// One row per grid point, floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        let present: Vec<&[f64]> = Channel::ALL.iter().filter_map(|c| self.channel(*c)).collect();
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            push_float(&mut line, self.time(k));
            for v in self.state(k).iter().chain(self.input(k)).chain(present.iter().map(|c| &c[k])) {
                line.push(',');
                push_float(&mut line, *v);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

fn push_float(s: &mut String, v: f64) {
    use std::fmt::Write;
    write!(s, "{v:?}").expect("writing to a string");
}
