//! Structural Verilog-2001 for gate netlists, and a reader for exactly the
//! subset the emitter produces.
//!
//! The module is `tmcm_obf(i, k, x, y)` with `i[⌈log2 N⌉-1:0]`, `k[p-1:0]`,
//! `x[ibw-1:0]` and `y[cbw+ibw-1:0]`, all LSB at index 0. A single-tap
//! design has no select bits; it still declares a one-bit `i` that no gate
//! reads, marked by a `// unused` comment so the reader can drop it again.
//! Gate outputs are wires named `n<id>` after their net ids.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hw::netlist::{Gate, GateNetlist, NetId, NetlistInputs, CONST0, CONST1};

pub const MODULE_NAME: &str = "tmcm_obf";

fn net_name(netlist: &GateNetlist, n: NetId) -> String {
    let sw = netlist.inputs.i.len() as NetId;
    let p = netlist.inputs.k.len() as NetId;
    let ibw = netlist.inputs.x.len() as NetId;
    match n {
        CONST0 => "1'b0".to_string(),
        CONST1 => "1'b1".to_string(),
        _ if n < 2 + sw => format!("i[{}]", n - 2),
        _ if n < 2 + sw + p => format!("k[{}]", n - 2 - sw),
        _ if n < 2 + sw + p + ibw => format!("x[{}]", n - 2 - sw - p),
        _ => format!("n{n}"),
    }
}

fn port(name: &str, dir: &str, width: usize, unused: bool) -> String {
    let range = format!("[{}:0]", width.max(1) - 1);
    let note = if unused { " // unused" } else { "" };
    format!("  {dir} {range} {name};{note}\n")
}

pub fn emit_verilog(netlist: &GateNetlist) -> String {
    let mut v = String::new();
    let counts = netlist.gate_counts();
    let summary: Vec<String> = counts.iter().map(|(k, c)| format!("{k}={c}")).collect();
    writeln!(v, "// gates: {}", if summary.is_empty() { "none".into() } else { summary.join(" ") }).unwrap();
    writeln!(v, "module {MODULE_NAME} (i, k, x, y);").unwrap();
    v += &port("i", "input", netlist.inputs.i.len(), netlist.inputs.i.is_empty());
    v += &port("k", "input", netlist.inputs.k.len(), netlist.inputs.k.is_empty());
    v += &port("x", "input", netlist.inputs.x.len(), false);
    v += &port("y", "output", netlist.outputs.len(), false);
    let first = netlist.first_gate_net();
    for j in 0..netlist.gates.len() {
        writeln!(v, "  wire n{};", first + j as NetId).unwrap();
    }
    for (j, gate) in netlist.gates.iter().enumerate() {
        let out = first + j as NetId;
        let nm = |n: NetId| net_name(netlist, n);
        let line = match *gate {
            Gate::And { a, b } => format!("  and g{j} (n{out}, {}, {});", nm(a), nm(b)),
            Gate::Or { a, b } => format!("  or g{j} (n{out}, {}, {});", nm(a), nm(b)),
            Gate::Xor { a, b } => format!("  xor g{j} (n{out}, {}, {});", nm(a), nm(b)),
            Gate::Not { a } => format!("  not g{j} (n{out}, {});", nm(a)),
            Gate::Mux2 { a, b, s } => format!("  assign n{out} = {} ? {} : {};", nm(s), nm(b), nm(a)),
        };
        v += &line;
        v.push('\n');
    }
    for (j, &o) in netlist.outputs.iter().enumerate() {
        writeln!(v, "  assign y[{j}] = {};", net_name(netlist, o)).unwrap();
    }
    v += "endmodule\n";
    v
}

struct Reader {
    widths: HashMap<String, usize>,
    unused: Vec<String>,
    ports: Vec<String>,
    wires: HashMap<String, NetId>,
    gates: Vec<Gate>,
    outputs: BTreeMap<usize, NetId>,
    declared: Vec<String>,
    next_net: NetId,
}

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn parse_index(text: &str, line: usize) -> Result<usize> {
    text.parse().map_err(|_| err(line, format!("bad index {text:?}")))
}

impl Reader {
    fn input_base(&self, name: &str) -> NetId {
        let order = ["i", "k", "x"];
        let mut base = 2;
        for port in order {
            if port == name {
                break;
            }
            base += self.effective_width(port) as NetId;
        }
        base
    }

    fn effective_width(&self, name: &str) -> usize {
        if self.unused.iter().any(|u| u == name) {
            0
        } else {
            self.widths.get(name).copied().unwrap_or(0)
        }
    }

    fn net(&self, token: &str, line: usize) -> Result<NetId> {
        match token {
            "1'b0" => return Ok(CONST0),
            "1'b1" => return Ok(CONST1),
            _ => {}
        }
        if let Some(&n) = self.wires.get(token) {
            return Ok(n);
        }
        if let Some((name, rest)) = token.split_once('[') {
            let idx = parse_index(rest.trim_end_matches(']'), line)?;
            if matches!(name, "i" | "k" | "x") {
                if idx >= self.effective_width(name) {
                    return Err(err(line, format!("{token} is out of range")));
                }
                return Ok(self.input_base(name) + idx as NetId);
            }
        }
        Err(err(line, format!("undriven or unknown net {token:?}")))
    }

    fn define(&mut self, name: &str, gate: Gate, line: usize) -> Result<()> {
        if !self.declared.iter().any(|d| d == name) {
            return Err(err(line, format!("wire {name} is not declared")));
        }
        if self.wires.contains_key(name) {
            return Err(err(line, format!("wire {name} is driven twice")));
        }
        self.wires.insert(name.to_string(), self.next_net);
        self.next_net += 1;
        self.gates.push(gate);
        Ok(())
    }

    fn statement(&mut self, stmt: &str, line: usize) -> Result<()> {
        let (head, rest) = stmt.split_once(char::is_whitespace).unwrap_or((stmt, ""));
        let rest = rest.trim();
        match head {
            "module" => {
                let open = rest.find('(').ok_or_else(|| err(line, "missing port list"))?;
                let list = rest[open + 1..].trim_end_matches(')');
                self.ports = list.split(',').map(|s| s.trim().to_string()).collect();
                if self.ports != ["i", "k", "x", "y"] {
                    return Err(err(line, "ports must be (i, k, x, y)"));
                }
            }
            "input" | "output" => {
                let (range, name) =
                    rest.rsplit_once(char::is_whitespace).ok_or_else(|| err(line, "expected `[msb:0] name`"))?;
                let msb = range
                    .trim()
                    .strip_prefix('[')
                    .and_then(|r| r.strip_suffix(":0]"))
                    .ok_or_else(|| err(line, format!("bad range {range:?}")))?;
                self.widths.insert(name.to_string(), parse_index(msb, line)? + 1);
                self.next_net = 2 + ["i", "k", "x"].iter().map(|p| self.effective_width(p) as NetId).sum::<NetId>();
            }
            "wire" => self.declared.extend(rest.split(',').map(|s| s.trim().to_string())),
            "and" | "or" | "xor" | "not" => {
                let open = rest.find('(').ok_or_else(|| err(line, "missing terminal list"))?;
                let terms: Vec<&str> = rest[open + 1..].trim_end_matches(')').split(',').map(str::trim).collect();
                let arity = if head == "not" { 2 } else { 3 };
                if terms.len() != arity {
                    return Err(err(line, format!("{head} expects {arity} terminals")));
                }
                let a = self.net(terms[1], line)?;
                let gate = match head {
                    "not" => Gate::Not { a },
                    _ => {
                        let b = self.net(terms[2], line)?;
                        match head {
                            "and" => Gate::And { a, b },
                            "or" => Gate::Or { a, b },
                            _ => Gate::Xor { a, b },
                        }
                    }
                };
                self.define(terms[0], gate, line)?;
            }
            "assign" => {
                let (lhs, rhs) = rest.split_once('=').ok_or_else(|| err(line, "expected `=`"))?;
                let (lhs, rhs) = (lhs.trim(), rhs.trim());
                if let Some(idx) = lhs.strip_prefix("y[").and_then(|r| r.strip_suffix(']')) {
                    let n = self.net(rhs, line)?;
                    self.outputs.insert(parse_index(idx, line)?, n);
                } else {
                    let (s, arms) = rhs.split_once('?').ok_or_else(|| err(line, "expected `s ? b : a`"))?;
                    let (b, a) = arms.split_once(':').ok_or_else(|| err(line, "expected `s ? b : a`"))?;
                    let gate = Gate::Mux2 {
                        a: self.net(a.trim(), line)?,
                        b: self.net(b.trim(), line)?,
                        s: self.net(s.trim(), line)?,
                    };
                    self.define(lhs, gate, line)?;
                }
            }
            _ => return Err(err(line, format!("unsupported statement {head:?}"))),
        }
        Ok(())
    }
}

/// Reads a module written by [`emit_verilog`] back into a netlist.
pub fn parse_verilog(text: &str) -> Result<GateNetlist> {
    let mut r = Reader {
        widths: HashMap::new(),
        unused: Vec::new(),
        ports: Vec::new(),
        wires: HashMap::new(),
        gates: Vec::new(),
        outputs: BTreeMap::new(),
        declared: Vec::new(),
        next_net: 2,
    };
    let mut ended = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let (code, comment) = raw.split_once("//").unwrap_or((raw, ""));
        let code = code.trim();
        if code.is_empty() {
            continue;
        }
        if ended {
            return Err(err(line, "text after endmodule"));
        }
        if code == "endmodule" {
            ended = true;
            continue;
        }
        let stmt = code.strip_suffix(';').ok_or_else(|| err(line, "missing `;`"))?;
        if comment.trim() == "unused" && stmt.starts_with("input") {
            if let Some(name) = stmt.split_whitespace().last() {
                r.unused.push(name.to_string());
            }
        }
        r.statement(stmt, line)?;
    }
    if !ended {
        return Err(Error::Parse("missing endmodule".into()));
    }
    let y_width = r.widths.get("y").copied().ok_or_else(|| Error::Parse("no output y".into()))?;
    let outputs: Vec<NetId> = (0..y_width)
        .map(|j| r.outputs.get(&j).copied().ok_or_else(|| Error::Parse(format!("y[{j}] is not assigned"))))
        .collect::<Result<_>>()?;
    let range = |name: &str| {
        let base = r.input_base(name);
        (base..base + r.effective_width(name) as NetId).collect::<Vec<_>>()
    };
    let netlist = GateNetlist {
        inputs: NetlistInputs { i: range("i"), k: range("k"), x: range("x") },
        outputs,
        gates: r.gates,
        names: BTreeMap::new(),
    };
    netlist.validate()?;
    Ok(netlist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hw::lower::lower_to_gates;
    use crate::hw::tmcm::{ConstantMultiplier, ObfuscatedTmcm};
    use crate::key::Key;
    use rand::Rng;

    fn strip_names(mut n: GateNetlist) -> GateNetlist {
        n.names.clear();
        n
    }

    #[test]
    fn round_trip_is_identical() {
        let t =
            ObfuscatedTmcm::from_tables(vec![vec![-3, 5, -8, 7], vec![6, 1], vec![0, -1], vec![100, -90]], 8).unwrap();
        let net = lower_to_gates(&t);
        let text = emit_verilog(&net);
        let back = parse_verilog(&text).unwrap();
        assert_eq!(back, strip_names(net.clone()));
        let mut rng = crate::seeded_rng(1);
        for _ in 0..1000 {
            let key = Key::from_bits((0..5).map(|_| rng.gen()).collect());
            let q = [(rng.gen_range(0..4), rng.gen_range(-128..128))];
            assert_eq!(back.eval_bits(&key, &q), net.eval_bits(&key, &q));
        }
    }

    #[test]
    fn port_widths() {
        let t = ObfuscatedTmcm::from_tables(vec![vec![3, 1], vec![2, 6], vec![5, 4]], 6).unwrap();
        let text = emit_verilog(&lower_to_gates(&t));
        assert!(text.contains("input [1:0] i;"));
        assert!(text.contains("input [2:0] k;"));
        assert!(text.contains("input [5:0] x;"));
        assert!(text.contains("output [9:0] y;"));
    }

    #[test]
    fn single_tap_module() {
        let t = ObfuscatedTmcm::from_tables(vec![vec![3, 2]], 4).unwrap();
        let net = lower_to_gates(&t);
        let text = emit_verilog(&net);
        assert!(text.contains("input [0:0] i; // unused"));
        let back = parse_verilog(&text).unwrap();
        assert!(back.inputs.i.is_empty());
        assert_eq!(back, strip_names(net));
    }

    #[test]
    fn diagnostics_name_the_line() {
        let t = ObfuscatedTmcm::from_tables(vec![vec![3, 2], vec![7, 1]], 4).unwrap();
        let text = emit_verilog(&lower_to_gates(&t));
        let broken = text.replacen("and g", "nand g", 1);
        let msg = parse_verilog(&broken).unwrap_err().to_string();
        assert!(msg.contains("line "), "{msg}");
        assert!(parse_verilog("module tmcm_obf (i, k, x, y);\n").is_err());
    }
}
