//! Satisfiability-based variant of single-bit extraction: the miter between
//! the netlist and a reference multiplier by the hypothesised partial
//! constant is unsatisfiable exactly when the hypothesis is consistent.

use rayon::prelude::*;
use varisat::{ExtendFormula, Lit, Solver};

use crate::attack::extract::{constant_width, probe_key, verify_constant, RecoveredConstantSets};
use crate::error::{Error, Result};
use crate::hw::lower::{const_bits, signed_multiply};
use crate::hw::netlist::{Gate, GateNetlist, NetId, NetlistBuilder, NetlistInputs, CONST0, CONST1};
use crate::key::{Key, KeyLayout};

/// Tseitin-encodes `netlist` with its primary inputs bound to `input_lits`.
/// Returns one literal per net.
fn encode(solver: &mut Solver, netlist: &GateNetlist, input_lits: &[Lit], zero: Lit) -> Vec<Lit> {
    let mut lits = Vec::with_capacity(netlist.num_nets());
    lits.push(zero);
    lits.push(!zero);
    lits.extend_from_slice(input_lits);
    for gate in &netlist.gates {
        let o = solver.new_lit();
        let l = |n: NetId| lits[n as usize];
        match *gate {
            Gate::And { a, b } => {
                let (a, b) = (l(a), l(b));
                solver.add_clause(&[!o, a]);
                solver.add_clause(&[!o, b]);
                solver.add_clause(&[o, !a, !b]);
            }
            Gate::Or { a, b } => {
                let (a, b) = (l(a), l(b));
                solver.add_clause(&[o, !a]);
                solver.add_clause(&[o, !b]);
                solver.add_clause(&[!o, a, b]);
            }
            Gate::Xor { a, b } => {
                let (a, b) = (l(a), l(b));
                solver.add_clause(&[!o, a, b]);
                solver.add_clause(&[!o, !a, !b]);
                solver.add_clause(&[o, !a, b]);
                solver.add_clause(&[o, a, !b]);
            }
            Gate::Not { a } => {
                let a = l(a);
                solver.add_clause(&[o, a]);
                solver.add_clause(&[!o, !a]);
            }
            Gate::Mux2 { a, b, s } => {
                let (a, b, s) = (l(a), l(b), l(s));
                solver.add_clause(&[s, !a, o]);
                solver.add_clause(&[s, a, !o]);
                solver.add_clause(&[!s, !b, o]);
                solver.add_clause(&[!s, b, !o]);
            }
        }
        lits.push(o);
    }
    lits
}

/// Netlist computing the low `j + 1` product bits of `partial · x` for a
/// `(j + 1)`-bit input.
fn reference(partial: u64, j: u32) -> GateNetlist {
    let width = (j + 1) as usize;
    let mut b = NetlistBuilder::new(width);
    let x: Vec<NetId> = (0..width).map(|t| b.input(t)).collect();
    // One extra zero bit keeps the constant non-negative.
    let c = const_bits(partial as i64, j + 2);
    let y = signed_multiply(&mut b, &c, &x, width);
    b.finish(NetlistInputs { i: vec![], k: vec![], x }, y)
}

fn consistent(netlist: &GateNetlist, i: usize, key: &Key, partial: u64, j: u32) -> Result<bool> {
    let mut solver = Solver::new();
    let zero = solver.new_lit();
    solver.add_clause(&[!zero]);
    let fixed = |v: bool| if v { !zero } else { zero };
    let free = ((j + 1) as usize).min(netlist.inputs.x.len());
    let x_free: Vec<Lit> = (0..free).map(|_| solver.new_lit()).collect();

    let mut inputs = Vec::with_capacity(netlist.num_inputs());
    inputs.extend((0..netlist.inputs.i.len()).map(|b| fixed((i >> b) & 1 == 1)));
    inputs.extend((0..netlist.inputs.k.len()).map(|b| fixed(key.bit(b))));
    inputs.extend((0..netlist.inputs.x.len()).map(|b| x_free.get(b).copied().unwrap_or(zero)));
    let f = encode(&mut solver, netlist, &inputs, zero);

    let r = reference(partial, j);
    // Past the input width the reference sees the sign-extended input.
    let sign = x_free.last().copied().unwrap_or(zero);
    let r_inputs: Vec<Lit> = (0..=j as usize).map(|b| x_free.get(b).copied().unwrap_or(sign)).collect();
    let g = encode(&mut solver, &r, &r_inputs, zero);

    let a = f[netlist.outputs[j as usize] as usize];
    let b = g[r.outputs[j as usize] as usize];
    // Miter: a XOR b must hold.
    solver.add_clause(&[a, b]);
    solver.add_clause(&[!a, !b]);
    let sat = solver.solve().map_err(|e| Error::InconsistentAssignment(format!("solver failure: {e}")))?;
    Ok(!sat)
}

/// Same contract as [`super::extract::extract_bit`], decided by two
/// satisfiability queries on the gate netlist.
pub fn extract_bit_sat(netlist: &GateNetlist, i: usize, key: &Key, partial: u64, j: u32) -> Result<bool> {
    let zero_ok = consistent(netlist, i, key, partial, j)?;
    let one_ok = consistent(netlist, i, key, partial | (1 << j), j)?;
    match (zero_ok, one_ok) {
        (true, false) => Ok(false),
        (false, true) => Ok(true),
        (true, true) => Err(Error::InconsistentAssignment(format!("bit {j} of select {i} is not determined"))),
        (false, false) => Err(Error::NoConsistentBit { select: i, slice: 0, bit: j }),
    }
}

/// The netlist with select and key inputs tied to `i` and `key` and the
/// resulting constants propagated; only the `x` inputs remain.
pub fn specialize(netlist: &GateNetlist, i: usize, key: &Key) -> GateNetlist {
    let nx = netlist.inputs.x.len();
    let mut b = NetlistBuilder::new(nx);
    let mut map: Vec<NetId> = (0..netlist.num_nets() as NetId).collect();
    let tie = |v: bool| if v { CONST1 } else { CONST0 };
    for (bit, &n) in netlist.inputs.i.iter().enumerate() {
        map[n as usize] = tie((i >> bit) & 1 == 1);
    }
    for (bit, &n) in netlist.inputs.k.iter().enumerate() {
        map[n as usize] = tie(key.bit(bit));
    }
    let x: Vec<NetId> = (0..nx).map(|t| b.input(t)).collect();
    for (t, &n) in netlist.inputs.x.iter().enumerate() {
        map[n as usize] = x[t];
    }
    let first = netlist.first_gate_net() as usize;
    for (j, gate) in netlist.gates.iter().enumerate() {
        let m = |n: NetId| map[n as usize];
        map[first + j] = match *gate {
            Gate::And { a, b: c } => b.and(m(a), m(c)),
            Gate::Or { a, b: c } => b.or(m(a), m(c)),
            Gate::Xor { a, b: c } => b.xor(m(a), m(c)),
            Gate::Not { a } => b.not(m(a)),
            Gate::Mux2 { a, b: c, s } => b.mux(m(a), m(c), m(s)),
        };
    }
    let outputs = netlist.outputs.iter().map(|&n| map[n as usize]).collect();
    b.finish(NetlistInputs { i: vec![], k: vec![], x }, outputs)
}

/// Recovers one constant bit by bit through the solver, on the netlist
/// specialized to `(i, key)`.
pub fn extract_constant_sat(netlist: &GateNetlist, i: usize, key: &Key) -> Result<i64> {
    let cbw = netlist.outputs.len() as u32 - netlist.inputs.x.len() as u32;
    let fixed = specialize(netlist, i, key);
    let mut bits = 0u64;
    for j in 0..cbw {
        let bit = extract_bit_sat(&fixed, 0, &Key::zeros(0), bits, j).map_err(|e| match e {
            Error::NoConsistentBit { slice, bit, .. } => Error::NoConsistentBit { select: i, slice, bit },
            other => other,
        })?;
        if bit {
            bits |= 1 << j;
        }
    }
    Ok(crate::bits::from_twos(bits, cbw))
}

/// [`super::extract::extract_constants`] with every bit decided by the
/// solver; recovered constants get the same random-input check.
pub fn extract_constants_sat(netlist: &GateNetlist, layout: &KeyLayout, seed: u64) -> Result<RecoveredConstantSets> {
    let jobs: Vec<(usize, u64)> =
        (0..layout.len()).flat_map(|i| (0..1u64 << layout.widths[i]).map(move |s| (i, s))).collect();
    let values: Vec<i64> = jobs
        .par_iter()
        .enumerate()
        .map(|(n, &(i, s))| {
            let key = probe_key(layout, i, s);
            let value = extract_constant_sat(netlist, i, &key)?;
            if !verify_constant(netlist, i, &key, value, seed.wrapping_add(n as u64)) {
                return Err(Error::VerificationMismatch { select: i, slice: s, value });
            }
            Ok(value)
        })
        .collect::<Result<_>>()?;
    let mut sets = vec![Vec::new(); layout.len()];
    for (&(i, _), v) in jobs.iter().zip(values) {
        sets[i].push(v);
    }
    Ok(RecoveredConstantSets { sets, cbw: constant_width(netlist) })
}
