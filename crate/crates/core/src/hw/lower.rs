//! Gate-level lowering of the obfuscated TMCM.

use crate::bits::{ceil_log2, to_twos};
use crate::hw::netlist::{GateNetlist, NetId, NetlistBuilder, NetlistInputs, CONST0, CONST1};
use crate::hw::tmcm::ObfuscatedTmcm;

/// Bit vector of a constant as hard-wired nets, LSB first.
pub fn const_bits(value: i64, width: u32) -> Vec<NetId> {
    let bits = to_twos(value, width);
    (0..width).map(|b| if (bits >> b) & 1 == 1 { CONST1 } else { CONST0 }).collect()
}

/// Selects `leaves[sel]` bitwise with a MUX2 tree; `sel` is LSB first and
/// `leaves.len()` must equal `2^sel.len()`.
pub fn mux_tree(b: &mut NetlistBuilder, leaves: &[Vec<NetId>], sel: &[NetId]) -> Vec<NetId> {
    assert_eq!(leaves.len(), 1 << sel.len());
    let mut level: Vec<Vec<NetId>> = leaves.to_vec();
    for &s in sel {
        level = level
            .chunks(2)
            .map(|pair| pair[0].iter().zip(&pair[1]).map(|(&lo, &hi)| b.mux(lo, hi, s)).collect())
            .collect();
    }
    level.pop().unwrap()
}

/// Adds `row` into `acc` starting at bit `shift`, modulo `2^acc.len()`.
fn add_shifted(b: &mut NetlistBuilder, acc: &mut [NetId], row: &[NetId], shift: usize, carry_in: NetId) {
    let mut carry = carry_in;
    for t in shift..acc.len() {
        let r = row.get(t - shift).copied().unwrap_or(CONST0);
        let (s, c) = b.full_adder(acc[t], r, carry);
        acc[t] = s;
        carry = c;
    }
}

/// Signed product `c * x` modulo `2^width`. Both operands are two's
/// complement; `x` is sign-extended to `width` bits and the top bit of `c`
/// carries negative weight, so that row is added as `!x + 1`.
pub fn signed_multiply(b: &mut NetlistBuilder, c: &[NetId], x: &[NetId], width: usize) -> Vec<NetId> {
    let sign = *x.last().unwrap();
    let x_ext: Vec<NetId> = (0..width).map(|t| x.get(t).copied().unwrap_or(sign)).collect();
    let mut acc = vec![CONST0; width];
    let top = c.len() - 1;
    for (j, &cj) in c.iter().enumerate().take(width) {
        if j < top {
            let row: Vec<NetId> = x_ext[..width - j].iter().map(|&xb| b.and(cj, xb)).collect();
            add_shifted(b, &mut acc, &row, j, CONST0);
        } else {
            // Subtract cj·x·2^j by adding cj·!x + cj.
            let row: Vec<NetId> = x_ext[..width - j]
                .iter()
                .map(|&xb| {
                    let nx = b.not(xb);
                    b.and(cj, nx)
                })
                .collect();
            add_shifted(b, &mut acc, &row, j, cj);
        }
    }
    acc
}

/// Lowers the word-level TMCM to gates: per coefficient a key-driven MUX2
/// tree over hard-wired constants, a select-driven tree over those, and a
/// signed array multiplier, all constant-folded.
pub fn lower_to_gates(tmcm: &ObfuscatedTmcm) -> GateNetlist {
    let n = tmcm.taps();
    let sw = ceil_log2(n) as usize;
    let p = tmcm.key_bits();
    let ibw = tmcm.ibw as usize;
    let cbw = tmcm.cbw;
    let mut b = NetlistBuilder::new(sw + p + ibw);
    let i_nets: Vec<NetId> = (0..sw).map(|j| b.input(j)).collect();
    let k_nets: Vec<NetId> = (0..p).map(|j| b.input(sw + j)).collect();
    let x_nets: Vec<NetId> = (0..ibw).map(|j| b.input(sw + p + j)).collect();

    let mut selected: Vec<Vec<NetId>> = Vec::with_capacity(1 << sw);
    for (i, table) in tmcm.mux_tables.iter().enumerate() {
        let leaves: Vec<Vec<NetId>> = table.iter().map(|&c| const_bits(c, cbw)).collect();
        let sel: Vec<NetId> = tmcm.layout.range(i).map(|k| k_nets[k]).collect();
        selected.push(mux_tree(&mut b, &leaves, &sel));
    }
    selected.resize(1 << sw, vec![CONST0; cbw as usize]);
    let constant = mux_tree(&mut b, &selected, &i_nets);
    let product = signed_multiply(&mut b, &constant, &x_nets, (cbw + tmcm.ibw) as usize);
    let mut netlist = b.finish(NetlistInputs { i: i_nets, k: k_nets, x: x_nets }, product);
    for (j, &o) in netlist.outputs.clone().iter().enumerate() {
        netlist.names.entry(o).or_insert_with(|| format!("y[{j}]"));
    }
    netlist
}
