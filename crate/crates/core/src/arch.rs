//! Array resources and the ALU instruction set.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

/// Default array clock.
pub const DEFAULT_CLOCK_HZ: u64 = 250_000_000;
/// Default RAM element size in 32-bit words.
pub const DEFAULT_RAM_WORDS: u32 = 4096;
/// Upper bound on ALU grid cells for overridden dimensions.
pub const MAX_GRID_CELLS: usize = 4096;

/// Grid extents. Defaults: a 5x8 ALU matrix flanked by two columns of
/// eight RAM elements each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayDims {
    pub alu_rows: usize,
    pub alu_cols: usize,
    pub ram_sides: usize,
    pub ram_rows: usize,
    pub ram_capacity: u32,
}

impl Default for ArrayDims {
    fn default() -> Self {
        Self { alu_rows: 5, alu_cols: 8, ram_sides: 2, ram_rows: 8, ram_capacity: DEFAULT_RAM_WORDS }
    }
}

impl ArrayDims {
    pub fn alu_slots(&self) -> usize {
        self.alu_rows * self.alu_cols
    }

    pub fn ram_slots(&self) -> usize {
        self.ram_sides * self.ram_rows
    }

    pub fn check(&self) -> Result<(), String> {
        if self.alu_rows == 0 || self.alu_cols == 0 {
            return Err("ALU grid must be non-empty".into());
        }
        if self.alu_slots() > MAX_GRID_CELLS {
            return Err(format!("ALU grid {}x{} exceeds {MAX_GRID_CELLS} cells", self.alu_rows, self.alu_cols));
        }
        if self.ram_sides > 2 {
            return Err(format!("at most 2 RAM sides, got {}", self.ram_sides));
        }
        if self.ram_capacity == 0 {
            return Err("RAM capacity must be positive".into());
        }
        Ok(())
    }
}

/// ALU opcodes. Every opcode fires at most once per cycle with a latency of
/// one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    /// Emit `imm0`, `imm1` times (default once).
    Const,
    Route,
    /// Saturating `a + b` or `a + imm0`.
    Add,
    /// Saturating `a - b` or `a - imm0`.
    Sub,
    /// 64-bit product; `out0` gets the low word, `out1` (if declared) the high word.
    Mul,
    /// Grouped multiply-accumulate: one bias word on `in1`, then `imm0`
    /// products of `in0 * in1`; emits on `out0` after the last product.
    /// `out1`, if declared, forwards every `in0` operand.
    Mac,
    Shl,
    /// Rounding arithmetic right shift by `imm0`, ties away from zero. With
    /// two inputs the operand is the 64-bit value `in1:in0` (high:low).
    ShrRound,
    /// `min(max(a, imm0), imm1)`.
    Clamp,
    /// Emit `i % imm0` for `i in 0..imm1`.
    Counter,
    /// Consume `in0` as a selector, then forward `in1` (selector 0) or `in2`.
    Mux,
    /// Copy `in0` to both outputs.
    Dup,
}

/// Port and immediate counts accepted by an opcode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arity {
    pub inputs: RangeInclusive<usize>,
    pub outputs: RangeInclusive<usize>,
}

impl Opcode {
    pub const ALL: [Opcode; 12] = [
        Opcode::Const,
        Opcode::Route,
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Mac,
        Opcode::Shl,
        Opcode::ShrRound,
        Opcode::Clamp,
        Opcode::Counter,
        Opcode::Mux,
        Opcode::Dup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Const => "const",
            Opcode::Route => "route",
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Mac => "mac",
            Opcode::Shl => "shl",
            Opcode::ShrRound => "shr_round",
            Opcode::Clamp => "clamp",
            Opcode::Counter => "counter",
            Opcode::Mux => "mux",
            Opcode::Dup => "dup",
        }
    }

    pub fn arity(self) -> Arity {
        let (i, o) = match self {
            Opcode::Const | Opcode::Counter => (0..=0, 1..=1),
            Opcode::Route | Opcode::Clamp => (1..=1, 1..=1),
            Opcode::Add | Opcode::Sub | Opcode::Shl | Opcode::ShrRound => (1..=2, 1..=1),
            Opcode::Mul => (1..=2, 1..=2),
            Opcode::Mac => (2..=2, 1..=2),
            Opcode::Mux => (3..=3, 1..=1),
            Opcode::Dup => (1..=1, 2..=2),
        };
        Arity { inputs: i, outputs: o }
    }

    /// Immediates required for a given input count.
    pub fn immediates(self, inputs: usize) -> RangeInclusive<usize> {
        match self {
            Opcode::Const => 1..=2,
            Opcode::Route | Opcode::Mux | Opcode::Dup => 0..=0,
            Opcode::Add | Opcode::Sub | Opcode::Shl | Opcode::Mul => {
                if inputs == 1 {
                    1..=1
                } else {
                    0..=0
                }
            }
            Opcode::Mac | Opcode::ShrRound => 1..=1,
            Opcode::Clamp | Opcode::Counter => 2..=2,
        }
    }

    /// Semantic range checks on immediates, once counts are known good.
    pub fn check_immediates(self, imms: &[i32]) -> Result<(), String> {
        match (self, imms) {
            (Opcode::Const, [_, count]) if *count < 0 => Err(format!("const repeat count {count} is negative")),
            (Opcode::Mac, [taps]) if *taps < 1 => Err(format!("mac needs at least one tap, got {taps}")),
            (Opcode::ShrRound, [sh]) if !(0..=63).contains(sh) => Err(format!("shift {sh} outside 0..=63")),
            (Opcode::Shl, [sh]) if !(0..=31).contains(sh) => Err(format!("shift {sh} outside 0..=31")),
            (Opcode::Clamp, [lo, hi]) if lo > hi => Err(format!("clamp bounds {lo} > {hi}")),
            (Opcode::Counter, [m, _]) if *m < 1 => Err(format!("counter modulus {m} must be positive")),
            (Opcode::Counter, [_, n]) if *n < 0 => Err(format!("counter total {n} is negative")),
            _ => Ok(()),
        }
    }

    /// Whether the opcode produces values without any input.
    pub fn is_source(self) -> bool {
        matches!(self, Opcode::Const | Opcode::Counter)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Opcode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Opcode::ALL.into_iter().find(|op| op.name() == s).ok_or_else(|| format!("unknown opcode `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_resources() {
        let d = ArrayDims::default();
        assert_eq!(d.alu_slots(), 40);
        assert_eq!(d.ram_slots(), 16);
        assert!(d.check().is_ok());
    }

    #[test]
    fn opcode_names_roundtrip() {
        for op in Opcode::ALL {
            assert_eq!(op.name().parse::<Opcode>().unwrap(), op);
        }
        assert!("fma".parse::<Opcode>().is_err());
    }

    #[test]
    fn immediate_checks() {
        assert!(Opcode::ShrRound.check_immediates(&[64]).is_err());
        assert!(Opcode::ShrRound.check_immediates(&[62]).is_ok());
        assert!(Opcode::Clamp.check_immediates(&[5, -5]).is_err());
        assert!(Opcode::Counter.check_immediates(&[0, 3]).is_err());
        assert!(Opcode::Mac.check_immediates(&[0]).is_err());
    }
}
