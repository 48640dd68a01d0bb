//! Gate-level netlists over AND/OR/XOR/NOT/MUX2 and their simulation.
//!
//! Nets are numbered densely: `0` and `1` are the constants, then the primary
//! inputs `i`, `k`, `x` (each LSB first), then one net per gate in
//! topological order. Simulation is bit-parallel over 64 lanes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bits::to_twos;
use crate::error::{Error, Result};
use crate::hw::tmcm::ConstantMultiplier;
use crate::key::Key;

pub type NetId = u32;

pub const CONST0: NetId = 0;
pub const CONST1: NetId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "UPPERCASE")]
pub enum Gate {
    And {
        a: NetId,
        b: NetId,
    },
    Or {
        a: NetId,
        b: NetId,
    },
    Xor {
        a: NetId,
        b: NetId,
    },
    Not {
        a: NetId,
    },
    /// `s ? b : a`.
    Mux2 {
        a: NetId,
        b: NetId,
        s: NetId,
    },
}

impl Gate {
    pub fn fanin(&self) -> Vec<NetId> {
        match *self {
            Gate::And { a, b } | Gate::Or { a, b } | Gate::Xor { a, b } => vec![a, b],
            Gate::Not { a } => vec![a],
            Gate::Mux2 { a, b, s } => vec![a, b, s],
        }
    }

    fn eval(&self, v: &[u64]) -> u64 {
        let g = |n: NetId| v[n as usize];
        match *self {
            Gate::And { a, b } => g(a) & g(b),
            Gate::Or { a, b } => g(a) | g(b),
            Gate::Xor { a, b } => g(a) ^ g(b),
            Gate::Not { a } => !g(a),
            Gate::Mux2 { a, b, s } => (g(s) & g(b)) | (!g(s) & g(a)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistInputs {
    pub i: Vec<NetId>,
    pub k: Vec<NetId>,
    pub x: Vec<NetId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateNetlist {
    pub inputs: NetlistInputs,
    /// Product bits, LSB first; may reference constants or inputs directly.
    pub outputs: Vec<NetId>,
    pub gates: Vec<Gate>,
    /// Debug names for selected nets.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub names: BTreeMap<NetId, String>,
}

impl GateNetlist {
    pub fn num_inputs(&self) -> usize {
        self.inputs.i.len() + self.inputs.k.len() + self.inputs.x.len()
    }

    /// Net driven by the first gate.
    pub fn first_gate_net(&self) -> NetId {
        2 + self.num_inputs() as NetId
    }

    pub fn num_nets(&self) -> usize {
        self.first_gate_net() as usize + self.gates.len()
    }

    /// Checks the numbering convention and that every gate only reads
    /// constants, inputs or earlier gates.
    pub fn validate(&self) -> Result<()> {
        let expected: Vec<NetId> = (2..self.first_gate_net()).collect();
        let actual: Vec<NetId> = self.inputs.i.iter().chain(&self.inputs.k).chain(&self.inputs.x).copied().collect();
        if actual != expected {
            return Err(Error::Parse("inputs: nets must be numbered 2.. in i, k, x order".into()));
        }
        let first = self.first_gate_net();
        for (j, gate) in self.gates.iter().enumerate() {
            let out = first + j as NetId;
            if let Some(bad) = gate.fanin().into_iter().find(|&n| n >= out) {
                return Err(Error::Parse(format!("gates[{j}]: input net {bad} is not driven before net {out}")));
            }
        }
        if let Some((o, bad)) = self.outputs.iter().enumerate().find(|(_, &n)| n as usize >= self.num_nets()) {
            return Err(Error::Parse(format!("outputs[{o}]: net {bad} does not exist")));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let n: GateNetlist = serde_json::from_str(text)?;
        n.validate()?;
        Ok(n)
    }

    /// Evaluates 64 lanes at once. `input_words` holds one word per primary
    /// input in `i, k, x` order; returns one word per output bit.
    pub fn simulate(&self, input_words: &[u64], scratch: &mut Vec<u64>) -> Vec<u64> {
        assert_eq!(input_words.len(), self.num_inputs());
        scratch.clear();
        scratch.reserve(self.num_nets());
        scratch.push(0);
        scratch.push(!0);
        scratch.extend_from_slice(input_words);
        for gate in &self.gates {
            let v = gate.eval(scratch);
            scratch.push(v);
        }
        self.outputs.iter().map(|&o| scratch[o as usize]).collect()
    }

    /// Packs up to 64 `(i, key, x)` vectors into lane words.
    fn pack(&self, key: &Key, queries: &[(usize, i64)]) -> Vec<u64> {
        assert!(queries.len() <= 64);
        let mut words = vec![0u64; self.num_inputs()];
        let (iw, kw) = (self.inputs.i.len(), self.inputs.k.len());
        for (b, w) in words[iw..iw + kw].iter_mut().enumerate() {
            if key.bit(b) {
                *w = !0;
            }
        }
        let xw = self.inputs.x.len() as u32;
        for (lane, &(i, x)) in queries.iter().enumerate() {
            for b in 0..iw {
                words[b] |= ((i as u64 >> b) & 1) << lane;
            }
            let xb = to_twos(x, xw);
            for b in 0..xw as usize {
                words[iw + kw + b] |= ((xb >> b) & 1) << lane;
            }
        }
        words
    }

    fn unpack(outputs: &[u64], lanes: usize) -> Vec<u64> {
        (0..lanes).map(|lane| outputs.iter().enumerate().map(|(b, w)| ((w >> lane) & 1) << b).sum()).collect()
    }

    pub fn gate_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for g in &self.gates {
            let name = match g {
                Gate::And { .. } => "AND",
                Gate::Or { .. } => "OR",
                Gate::Xor { .. } => "XOR",
                Gate::Not { .. } => "NOT",
                Gate::Mux2 { .. } => "MUX2",
            };
            *counts.entry(name).or_default() += 1;
        }
        counts
    }
}

impl ConstantMultiplier for GateNetlist {
    fn select_width(&self) -> u32 {
        self.inputs.i.len() as u32
    }

    fn key_bits(&self) -> usize {
        self.inputs.k.len()
    }

    fn input_width(&self) -> u32 {
        self.inputs.x.len() as u32
    }

    fn output_width(&self) -> u32 {
        self.outputs.len() as u32
    }

    fn eval_bits(&self, key: &Key, queries: &[(usize, i64)]) -> Vec<u64> {
        let mut scratch = Vec::new();
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(64) {
            let words = self.pack(key, chunk);
            let outputs = self.simulate(&words, &mut scratch);
            out.extend(Self::unpack(&outputs, chunk.len()));
        }
        out
    }
}

/// Incremental netlist construction with constant propagation and
/// structural hashing.
pub struct NetlistBuilder {
    num_inputs: usize,
    gates: Vec<Gate>,
    cache: HashMap<Gate, NetId>,
}

impl NetlistBuilder {
    pub fn new(num_inputs: usize) -> Self {
        Self { num_inputs, gates: Vec::new(), cache: HashMap::new() }
    }

    pub fn input(&self, index: usize) -> NetId {
        assert!(index < self.num_inputs);
        2 + index as NetId
    }

    fn first_gate(&self) -> NetId {
        2 + self.num_inputs as NetId
    }

    fn driver(&self, n: NetId) -> Option<Gate> {
        n.checked_sub(self.first_gate()).map(|j| self.gates[j as usize])
    }

    fn emit(&mut self, gate: Gate) -> NetId {
        if let Some(&n) = self.cache.get(&gate) {
            return n;
        }
        let n = self.first_gate() + self.gates.len() as NetId;
        self.gates.push(gate);
        self.cache.insert(gate, n);
        n
    }

    pub fn not(&mut self, a: NetId) -> NetId {
        match a {
            CONST0 => CONST1,
            CONST1 => CONST0,
            _ => match self.driver(a) {
                Some(Gate::Not { a: inner }) => inner,
                _ => self.emit(Gate::Not { a }),
            },
        }
    }

    fn complements(&self, a: NetId, b: NetId) -> bool {
        self.driver(a) == Some(Gate::Not { a: b }) || self.driver(b) == Some(Gate::Not { a })
    }

    pub fn and(&mut self, a: NetId, b: NetId) -> NetId {
        let (a, b) = (a.min(b), a.max(b));
        match (a, b) {
            (CONST0, _) => CONST0,
            (CONST1, other) => other,
            _ if a == b => a,
            _ if self.complements(a, b) => CONST0,
            _ => self.emit(Gate::And { a, b }),
        }
    }

    pub fn or(&mut self, a: NetId, b: NetId) -> NetId {
        let (a, b) = (a.min(b), a.max(b));
        match (a, b) {
            (CONST1, _) => CONST1,
            (CONST0, other) => other,
            _ if a == b => a,
            _ if self.complements(a, b) => CONST1,
            _ => self.emit(Gate::Or { a, b }),
        }
    }

    pub fn xor(&mut self, a: NetId, b: NetId) -> NetId {
        let (a, b) = (a.min(b), a.max(b));
        match (a, b) {
            (CONST0, other) => other,
            (CONST1, other) => self.not(other),
            _ if a == b => CONST0,
            _ if self.complements(a, b) => CONST1,
            _ => self.emit(Gate::Xor { a, b }),
        }
    }

    /// `s ? b : a`.
    pub fn mux(&mut self, a: NetId, b: NetId, s: NetId) -> NetId {
        match (a, b, s) {
            (_, _, CONST0) => a,
            (_, _, CONST1) => b,
            _ if a == b => a,
            (CONST0, CONST1, _) => s,
            (CONST1, CONST0, _) => self.not(s),
            (CONST0, _, _) => self.and(s, b),
            (_, CONST0, _) => {
                let ns = self.not(s);
                self.and(ns, a)
            }
            (CONST1, _, _) => {
                let ns = self.not(s);
                self.or(ns, b)
            }
            (_, CONST1, _) => self.or(s, a),
            _ => self.emit(Gate::Mux2 { a, b, s }),
        }
    }

    /// `(sum, carry)` of a full adder.
    pub fn full_adder(&mut self, a: NetId, b: NetId, c: NetId) -> (NetId, NetId) {
        let ab = self.xor(a, b);
        let sum = self.xor(ab, c);
        let g = self.and(a, b);
        let p = self.and(ab, c);
        (sum, self.or(g, p))
    }

    /// Drops gates that no output depends on and renumbers the rest.
    pub fn finish(self, inputs: NetlistInputs, outputs: Vec<NetId>) -> GateNetlist {
        let first = self.first_gate();
        let mut live = vec![false; self.gates.len()];
        let mut stack: Vec<NetId> = outputs.iter().copied().filter(|&n| n >= first).collect();
        while let Some(n) = stack.pop() {
            let j = (n - first) as usize;
            if !live[j] {
                live[j] = true;
                stack.extend(self.gates[j].fanin().into_iter().filter(|&m| m >= first));
            }
        }
        let mut remap: Vec<NetId> = (0..first).collect();
        remap.resize(first as usize + self.gates.len(), NetId::MAX);
        let mut gates = Vec::new();
        for (j, gate) in self.gates.iter().enumerate() {
            if !live[j] {
                continue;
            }
            let r = |n: NetId| remap[n as usize];
            let g = match *gate {
                Gate::And { a, b } => Gate::And { a: r(a), b: r(b) },
                Gate::Or { a, b } => Gate::Or { a: r(a), b: r(b) },
                Gate::Xor { a, b } => Gate::Xor { a: r(a), b: r(b) },
                Gate::Not { a } => Gate::Not { a: r(a) },
                Gate::Mux2 { a, b, s } => Gate::Mux2 { a: r(a), b: r(b), s: r(s) },
            };
            remap[first as usize + j] = first + gates.len() as NetId;
            gates.push(g);
        }
        let outputs = outputs.iter().map(|&n| remap[n as usize]).collect();
        GateNetlist { inputs, outputs, gates, names: BTreeMap::new() }
    }
}
