//! Assembly → Pcode fallback table.
//!
//! Records exported with a lifter carry their own `pcode` lists. For records without one,
//! each x86-64 mnemonic maps to a fixed multiset of Pcode operations. Mnemonics missing from
//! the table lift to `UNMAPPED`. This is a lower-fidelity approximation of a real lifter.

use std::borrow::Cow;

use crate::cfg::Instruction;

pub const UNMAPPED: &str = "UNMAPPED";

/// Pcode operations for one instruction: the recorded list when present, else the table.
pub fn lift(insn: &Instruction) -> Vec<Cow<'_, str>> {
    match &insn.pcode_ops {
        Some(ops) => ops.iter().map(|s| Cow::Borrowed(s.as_str())).collect(),
        None => fallback(&insn.mnemonic)
            .iter()
            .map(|s| Cow::Borrowed(*s))
            .collect(),
    }
}

/// Fixed Pcode multiset for a mnemonic.
pub fn fallback(mnemonic: &str) -> &'static [&'static str] {
    let m = mnemonic.to_ascii_lowercase();
    match m.as_str() {
        "mov" | "movabs" | "movq" | "movd" | "movaps" | "movups" | "movapd" | "movdqa" | "movdqu" => &["COPY"],
        "movzx" | "movzbl" | "movzwl" => &["INT_ZEXT"],
        "movsx" | "movsxd" | "movsbl" | "movswl" | "movslq" => &["INT_SEXT"],
        "lea" => &["INT_ADD", "COPY"],
        "xchg" => &["COPY", "COPY", "COPY"],
        "push" => &["INT_SUB", "STORE"],
        "pop" => &["LOAD", "INT_ADD"],
        "leave" => &["COPY", "LOAD", "INT_ADD"],
        "enter" => &["INT_SUB", "STORE", "COPY"],
        "add" => &["INT_ADD", "INT_CARRY", "INT_SCARRY"],
        "adc" => &["INT_ADD", "INT_ADD", "INT_CARRY", "INT_ZEXT"],
        "sub" => &["INT_SUB", "INT_LESS", "INT_SBORROW"],
        "sbb" => &["INT_SUB", "INT_SUB", "INT_LESS", "INT_ZEXT"],
        "inc" => &["INT_ADD", "INT_SCARRY"],
        "dec" => &["INT_SUB", "INT_SBORROW"],
        "neg" => &["INT_2COMP", "INT_NOTEQUAL"],
        "imul" => &["INT_MULT", "INT_SEXT"],
        "mul" => &["INT_MULT", "INT_ZEXT", "SUBPIECE"],
        "div" => &["INT_DIV", "INT_REM", "INT_ZEXT"],
        "idiv" => &["INT_SDIV", "INT_SREM", "INT_SEXT"],
        "and" => &["INT_AND", "INT_EQUAL", "INT_SLESS"],
        "or" => &["INT_OR", "INT_EQUAL", "INT_SLESS"],
        "xor" => &["INT_XOR", "INT_EQUAL", "INT_SLESS"],
        "not" => &["INT_NEGATE"],
        "shl" | "sal" => &["INT_LEFT", "INT_EQUAL"],
        "shr" => &["INT_RIGHT", "INT_EQUAL"],
        "sar" => &["INT_SRIGHT", "INT_EQUAL"],
        "rol" | "ror" => &["INT_LEFT", "INT_RIGHT", "INT_OR"],
        "bt" => &["INT_RIGHT", "INT_AND"],
        "bsf" | "bsr" | "tzcnt" | "lzcnt" => &["LZCOUNT"],
        "popcnt" => &["POPCOUNT"],
        "cmp" => &["INT_LESS", "INT_SBORROW", "INT_SUB", "INT_EQUAL"],
        "test" => &["INT_AND", "INT_EQUAL", "INT_SLESS"],
        "jmp" => &["BRANCH"],
        "call" => &["INT_SUB", "STORE", "CALL"],
        "ret" => &["LOAD", "INT_ADD", "RETURN"],
        "cdq" | "cqo" | "cwd" => &["INT_SRIGHT", "COPY"],
        "cdqe" | "cwde" | "cbw" => &["INT_SEXT"],
        "nop" | "endbr64" => &[],
        "hlt" | "int3" | "ud2" | "syscall" | "int" | "cpuid" | "rdtsc" => &["CALLOTHER"],
        "addss" | "addsd" | "addps" | "addpd" => &["FLOAT_ADD"],
        "subss" | "subsd" | "subps" | "subpd" => &["FLOAT_SUB"],
        "mulss" | "mulsd" | "mulps" | "mulpd" => &["FLOAT_MULT"],
        "divss" | "divsd" | "divps" | "divpd" => &["FLOAT_DIV"],
        "sqrtss" | "sqrtsd" => &["FLOAT_SQRT"],
        "movss" | "movsd" => &["COPY"],
        "ucomiss" | "ucomisd" | "comiss" | "comisd" => &["FLOAT_NAN", "FLOAT_LESS", "FLOAT_EQUAL"],
        "cvtsi2sd" | "cvtsi2ss" => &["INT2FLOAT"],
        "cvttsd2si" | "cvttss2si" => &["FLOAT_TRUNC"],
        "cvtss2sd" | "cvtsd2ss" => &["FLOAT2FLOAT"],
        "pxor" | "xorps" | "xorpd" => &["INT_XOR"],
        "pand" | "andps" | "andpd" => &["INT_AND"],
        "por" | "orps" => &["INT_OR"],
        "paddd" | "paddq" | "paddb" => &["INT_ADD"],
        "psubd" | "psubq" | "psubb" => &["INT_SUB"],
        "movsb" | "movsq" | "stosb" | "stosq" | "rep" => &["LOAD", "STORE", "INT_ADD"],
        "cmpxchg" => &["LOAD", "INT_EQUAL", "CBRANCH", "STORE"],
        "lock" => &["CALLOTHER"],
        "aesenc" | "aesdec" | "aesenclast" | "aesdeclast" => &["CALLOTHER"],
        _ if m.starts_with("cmov") => &["BOOL_NEGATE", "CBRANCH", "COPY"],
        _ if m.starts_with("set") => &["INT_EQUAL", "COPY"],
        _ if m.starts_with('j') => &["BOOL_NEGATE", "CBRANCH"],
        _ => &[UNMAPPED],
    }
}
