//! `.xcfg` parser. Syntax errors are collected line by line; structural
//! checks (placement, arity, references) run once the whole file is read.

use std::str::FromStr;

use super::diag::{has_errors, DiagCode, Diagnostic, Span};
use super::lexer::{lex_line, Tok, Token};
use super::model::*;
use super::validate::check_structure;
use crate::arch::{ArrayDims, Opcode};
use crate::dma::Dma4dDescriptor;
use crate::memory::{MemSpace, SpacedDma};

/// Source locations of parsed statements, indexed like the config's vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceMap {
    pub header: Option<Span>,
    pub alus: Vec<AluSpans>,
    pub rams: Vec<RamSpans>,
    pub streams: Vec<StreamSpans>,
    pub channels: Vec<ChannelSpans>,
    /// `(ram index, preload index)` → statement.
    pub preloads: Vec<((usize, usize), Span)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AluSpans {
    pub stmt: Span,
    pub name: Span,
    pub row: Span,
    pub col: Span,
    pub opcode: Span,
    pub imms: Span,
    pub inputs: Span,
    pub outputs: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RamSpans {
    pub stmt: Span,
    pub name: Span,
    pub side: Span,
    pub row: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSpans {
    pub stmt: Span,
    pub name: Span,
    pub port: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelSpans {
    pub stmt: Span,
    pub src: Span,
    pub dst: Span,
}

impl SourceMap {
    pub fn alu(&self, i: usize) -> Option<&AluSpans> {
        self.alus.get(i)
    }

    pub fn ram(&self, i: usize) -> Option<&RamSpans> {
        self.rams.get(i)
    }

    pub fn stream(&self, i: usize) -> Option<&StreamSpans> {
        self.streams.get(i)
    }

    pub fn channel(&self, i: usize) -> Option<&ChannelSpans> {
        self.channels.get(i)
    }

    pub fn preload(&self, ram: usize, idx: usize) -> Option<Span> {
        self.preloads.iter().find(|(k, _)| *k == (ram, idx)).map(|(_, s)| *s)
    }
}

/// Parse a single-configuration file.
pub fn parse(text: &str) -> Result<ArrayConfig, Vec<Diagnostic>> {
    parse_with_map(text).map(|(c, _)| c)
}

/// Parse and keep statement locations for later diagnostics.
pub fn parse_with_map(text: &str) -> Result<(ArrayConfig, SourceMap), Vec<Diagnostic>> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    parse_lines(&lines)
}

/// Parse a file holding several configurations, each starting at an
/// `array` header. Diagnostics from all of them are reported together.
pub fn parse_many(text: &str) -> Result<Vec<ArrayConfig>, Vec<Diagnostic>> {
    let mut chunks: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
    for (i, l) in text.lines().enumerate() {
        let starts = l.split('#').next().unwrap_or("").split_whitespace().next() == Some("array");
        if starts && chunks.last().is_some_and(|c| has_header(c)) {
            chunks.push(Vec::new());
        }
        chunks.last_mut().expect("non-empty").push((i + 1, l));
    }
    let mut configs = Vec::new();
    let mut diags = Vec::new();
    for chunk in &chunks {
        match parse_lines(chunk) {
            Ok((c, _)) => configs.push(c),
            Err(d) => diags.extend(d),
        }
    }
    if diags.is_empty() {
        Ok(configs)
    } else {
        Err(diags)
    }
}

fn has_header(lines: &[(usize, &str)]) -> bool {
    lines.iter().any(|(_, l)| l.split('#').next().unwrap_or("").split_whitespace().next() == Some("array"))
}

type PResult<T> = Result<T, Diagnostic>;

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    eol: Span,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], line_no: usize, line_len: usize) -> Self {
        Self { toks, pos: 0, eol: Span::new(line_no, line_len + 1, line_len + 2) }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.eol, |t| t.span)
    }

    fn prev_span(&self) -> Span {
        self.pos.checked_sub(1).and_then(|i| self.toks.get(i)).map_or(self.eol, |t| t.span)
    }

    fn expected(&self, what: &str) -> Diagnostic {
        let found = self.peek().map_or_else(|| "end of line".to_string(), Tok::describe);
        Diagnostic::error(DiagCode::Syntax, Some(self.span()), format!("expected {what}, found {found}"))
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        let hit = self.is_keyword(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.eat_keyword(kw) {
            Ok(self.prev_span())
        } else {
            Err(self.expected(&format!("`{kw}`")))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        let hit = self.peek() == Some(t);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn punct(&mut self, t: Tok) -> PResult<Span> {
        if self.eat(&t) {
            Ok(self.prev_span())
        } else {
            Err(self.expected(&t.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok((s.clone(), self.prev_span()))
            }
            _ => Err(self.expected(what)),
        }
    }

    fn int(&mut self, what: &str) -> PResult<(i64, Span)> {
        match self.peek() {
            Some(Tok::Int(v) | Tok::HexOrDims(v, _)) => {
                self.pos += 1;
                Ok((*v, self.prev_span()))
            }
            _ => Err(self.expected(what)),
        }
    }

    fn dims(&mut self, what: &str) -> PResult<((u64, u64), Span)> {
        match self.peek() {
            Some(Tok::Dims(a, b)) => {
                self.pos += 1;
                Ok(((*a, *b), self.prev_span()))
            }
            Some(Tok::HexOrDims(_, b)) => {
                self.pos += 1;
                Ok(((0, *b), self.prev_span()))
            }
            _ => Err(self.expected(what)),
        }
    }

    fn finish(&self) -> PResult<()> {
        if self.pos < self.toks.len() {
            Err(self.expected("end of line"))
        } else {
            Ok(())
        }
    }
}

fn conv<T: TryFrom<i64>>(v: i64, span: Span, what: &str) -> PResult<T> {
    T::try_from(v).map_err(|_| Diagnostic::error(DiagCode::IntRange, Some(span), format!("{what} {v} out of range")))
}

fn int32(c: &mut Cursor, what: &str) -> PResult<i32> {
    let (v, s) = c.int(what)?;
    conv(v, s, what)
}

/// Comma-separated integers until end of line or a non-comma token.
fn int32_list(c: &mut Cursor, what: &str) -> PResult<(Vec<i32>, Span)> {
    let start = c.span();
    let mut out = Vec::new();
    if !matches!(c.peek(), Some(Tok::Int(_) | Tok::HexOrDims(..))) {
        return Ok((out, start));
    }
    loop {
        out.push(int32(c, what)?);
        if !c.eat(&Tok::Comma) {
            break;
        }
    }
    Ok((out, start.to(c.prev_span())))
}

fn port_list(c: &mut Cursor, kw: &str) -> PResult<(Vec<String>, Span)> {
    let start = c.keyword(kw)?;
    c.punct(Tok::LBracket)?;
    let mut ports = Vec::new();
    if !c.eat(&Tok::RBracket) {
        loop {
            ports.push(c.ident("port name")?.0);
            if c.eat(&Tok::RBracket) {
                break;
            }
            c.punct(Tok::Comma)?;
        }
    }
    Ok((ports, start.to(c.prev_span())))
}

fn endpoint(c: &mut Cursor) -> PResult<(PortRef, Span)> {
    let (e, s0) = c.ident("element name")?;
    c.punct(Tok::Dot)?;
    let (p, s1) = c.ident("port name")?;
    Ok((PortRef::new(e, p), s0.to(s1)))
}

fn dma_clause(c: &mut Cursor) -> PResult<SpacedDma> {
    c.keyword("dma")?;
    let (space_name, space_span) = c.ident("memory space")?;
    let space =
        MemSpace::from_str(&space_name).map_err(|e| Diagnostic::error(DiagCode::Syntax, Some(space_span), e))?;
    let start = c.keyword("base")?;
    c.punct(Tok::Eq)?;
    let (b, bs) = c.int("base address")?;
    let base: u64 = conv(b, bs, "base address")?;
    let mut levels = [(1u32, 0i64); 4];
    for (i, lvl) in levels.iter_mut().enumerate() {
        c.keyword(&format!("l{}", 3 - i))?;
        c.punct(Tok::Eq)?;
        let (n, ns) = c.int("level count")?;
        c.punct(Tok::Colon)?;
        let (stride, _) = c.int("level stride")?;
        *lvl = (conv(n, ns, "level count")?, stride);
    }
    let desc = Dma4dDescriptor::new(base, levels)
        .map_err(|e| Diagnostic::error(DiagCode::IntRange, Some(start.to(c.prev_span())), e.to_string()))?;
    Ok(SpacedDma { space, desc })
}

#[derive(Default)]
struct Builder {
    config: Option<ArrayConfig>,
    map: SourceMap,
    pending_preloads: Vec<(String, Span, Preload, Span)>,
    pending_dma: Vec<(String, Span, SpacedDma)>,
}

fn parse_lines(lines: &[(usize, &str)]) -> Result<(ArrayConfig, SourceMap), Vec<Diagnostic>> {
    let mut b = Builder::default();
    let mut diags = Vec::new();
    for &(line_no, line) in lines {
        let toks = match lex_line(line, line_no) {
            Ok(t) => t,
            Err(d) => {
                diags.push(d);
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(&toks, line_no, line.chars().count());
        if let Err(d) = statement(&mut c, &mut b) {
            diags.push(d);
        }
    }
    let Some(mut config) = b.config.take() else {
        let span = lines.first().map(|(l, _)| Span::new(*l, 1, 2)).unwrap_or(Span::new(1, 1, 2));
        diags.push(Diagnostic::error(DiagCode::Header, Some(span), "missing `array` header"));
        return Err(diags);
    };
    let mut map = b.map;

    for (ram, ram_span, preload, stmt) in b.pending_preloads {
        match config.rams.iter().position(|r| r.name == ram) {
            Some(i) => {
                let idx = config.rams[i].preload.len();
                config.rams[i].preload.push(preload);
                map.preloads.push(((i, idx), stmt));
            }
            None => diags.push(Diagnostic::error(
                DiagCode::UnknownElement,
                Some(ram_span),
                format!("preload target `{ram}` is not a RAM element"),
            )),
        }
    }
    for (stream, span, dma) in b.pending_dma {
        match config.streams.iter_mut().find(|s| s.name == stream) {
            Some(s) => s.dma.push(dma),
            None => diags.push(Diagnostic::error(
                DiagCode::UnknownElement,
                Some(span),
                format!("unknown stream `{stream}`"),
            )),
        }
    }

    diags.extend(check_structure(&config, Some(&map)));
    if has_errors(&diags) {
        diags.sort_by_key(|d| d.span);
        Err(diags)
    } else {
        Ok((config, map))
    }
}

fn statement(c: &mut Cursor, b: &mut Builder) -> PResult<()> {
    let stmt_start = c.span();
    let (kw, kw_span) = c.ident("statement keyword")?;
    if kw == "array" {
        return header(c, b, kw_span);
    }
    let Some(config) = b.config.as_mut() else {
        return Err(Diagnostic::error(DiagCode::Header, Some(kw_span), format!("`{kw}` before the `array` header")));
    };
    match kw.as_str() {
        "name" => {
            let (n, _) = c.ident("configuration name")?;
            c.finish()?;
            config.name = n;
        }
        "pae" => {
            let (name, name_span) = c.ident("PAE name")?;
            c.keyword("at")?;
            c.punct(Tok::LParen)?;
            let (r, row_span) = c.int("row")?;
            c.punct(Tok::Comma)?;
            let (col, col_span) = c.int("column")?;
            c.punct(Tok::RParen)?;
            let row = conv(r, row_span, "row")?;
            let col = conv(col, col_span, "column")?;
            c.keyword("op")?;
            let (op, op_span) = c.ident("opcode")?;
            let opcode =
                Opcode::from_str(&op).map_err(|e| Diagnostic::error(DiagCode::UnknownOpcode, Some(op_span), e))?;
            let (imms, imm_span) = if c.eat_keyword("imm") {
                let s = c.prev_span();
                let (v, vs) = int32_list(c, "immediate")?;
                (v, s.to(vs))
            } else {
                (Vec::new(), op_span)
            };
            let (inputs, in_span) = port_list(c, "in")?;
            let (outputs, out_span) = port_list(c, "out")?;
            c.finish()?;
            let mut pae = AluPae::new(name, (row, col), opcode).with_imms(&imms);
            pae.inputs = inputs;
            pae.outputs = outputs;
            config.alus.push(pae);
            b.map.alus.push(AluSpans {
                stmt: stmt_start.to(c.prev_span()),
                name: name_span,
                row: row_span,
                col: col_span,
                opcode: op_span,
                imms: imm_span,
                inputs: in_span,
                outputs: out_span,
            });
        }
        "ram" => {
            let (name, name_span) = c.ident("RAM name")?;
            c.keyword("at")?;
            c.punct(Tok::LParen)?;
            let (side, side_span) = c.ident("`left` or `right`")?;
            let side = match side.as_str() {
                "left" => RamSide::Left,
                "right" => RamSide::Right,
                _ => {
                    return Err(Diagnostic::error(
                        DiagCode::Syntax,
                        Some(side_span),
                        format!("expected `left` or `right`, found `{side}`"),
                    ))
                }
            };
            c.punct(Tok::Comma)?;
            let (r, row_span) = c.int("row")?;
            let row = conv(r, row_span, "row")?;
            c.punct(Tok::RParen)?;
            c.keyword("mode")?;
            let (mode, mode_span) = c.ident("`fifo` or `ram`")?;
            let mode = match mode.as_str() {
                "fifo" => RamMode::Fifo,
                "ram" => RamMode::Ram,
                _ => {
                    return Err(Diagnostic::error(
                        DiagCode::Syntax,
                        Some(mode_span),
                        format!("expected `fifo` or `ram`, found `{mode}`"),
                    ))
                }
            };
            let mut ram = RamPae::new(name, side, row, mode);
            if c.eat_keyword("cap") {
                let (v, s) = c.int("capacity")?;
                ram.capacity = Some(conv(v, s, "capacity")?);
            }
            c.finish()?;
            config.rams.push(ram);
            b.map.rams.push(RamSpans {
                stmt: stmt_start.to(c.prev_span()),
                name: name_span,
                side: side_span,
                row: row_span,
            });
        }
        "preload" => {
            let (ram, ram_span) = c.ident("RAM name")?;
            let preload = if c.eat_keyword("words") {
                Preload::Words(int32_list(c, "preload word")?.0)
            } else if c.is_keyword("dma") {
                Preload::Dma(dma_clause(c)?)
            } else {
                return Err(c.expected("`words` or `dma`"));
            };
            c.finish()?;
            b.pending_preloads.push((ram, ram_span, preload, stmt_start.to(c.prev_span())));
        }
        "stream" => {
            let (name, name_span) = c.ident("stream name")?;
            if c.is_keyword("dma") {
                let dma = dma_clause(c)?;
                c.finish()?;
                b.pending_dma.push((name, name_span, dma));
                return Ok(());
            }
            let (dir, dir_span) = c.ident("`in`, `out` or `dma`")?;
            let stream = match dir.as_str() {
                "in" => {
                    c.punct(Tok::Arrow)?;
                    let (p, ps) = endpoint(c)?;
                    (StreamPort::input(name, p), ps)
                }
                "out" => {
                    c.punct(Tok::LArrow)?;
                    let (p, ps) = endpoint(c)?;
                    (StreamPort::output(name, p), ps)
                }
                _ => {
                    return Err(Diagnostic::error(
                        DiagCode::Syntax,
                        Some(dir_span),
                        format!("expected `in`, `out` or `dma`, found `{dir}`"),
                    ))
                }
            };
            c.finish()?;
            config.streams.push(stream.0);
            b.map.streams.push(StreamSpans { stmt: stmt_start.to(c.prev_span()), name: name_span, port: stream.1 });
        }
        "connect" => {
            let (src, src_span) = endpoint(c)?;
            c.punct(Tok::Arrow)?;
            let (dst, dst_span) = endpoint(c)?;
            c.finish()?;
            config.channels.push(Channel::new(src, dst));
            b.map.channels.push(ChannelSpans { stmt: stmt_start.to(c.prev_span()), src: src_span, dst: dst_span });
        }
        other => {
            return Err(Diagnostic::error(DiagCode::Syntax, Some(kw_span), format!("unknown statement `{other}`")));
        }
    }
    Ok(())
}

fn header(c: &mut Cursor, b: &mut Builder, kw_span: Span) -> PResult<()> {
    if b.config.is_some() {
        return Err(Diagnostic::error(DiagCode::Header, Some(kw_span), "duplicate `array` header"));
    }
    let ((ar, ac), alu_span) = c.dims("ALU grid `ROWSxCOLS`")?;
    c.keyword("alu")?;
    let ((rs, rr), ram_span) = c.dims("RAM grid `SIDESxROWS`")?;
    c.keyword("ram")?;
    let usize_of = |v: u64, s: Span| -> PResult<usize> {
        usize::try_from(v).map_err(|_| Diagnostic::error(DiagCode::IntRange, Some(s), "grid size out of range"))
    };
    let mut dims = ArrayDims {
        alu_rows: usize_of(ar, alu_span)?,
        alu_cols: usize_of(ac, alu_span)?,
        ram_sides: usize_of(rs, ram_span)?,
        ram_rows: usize_of(rr, ram_span)?,
        ..ArrayDims::default()
    };
    if c.eat_keyword("cap") {
        let (v, s) = c.int("RAM capacity")?;
        dims.ram_capacity = conv(v, s, "RAM capacity")?;
    }
    c.finish()?;
    let header_span = kw_span.to(c.prev_span());
    dims.check().map_err(|e| Diagnostic::error(DiagCode::Header, Some(header_span), e))?;
    b.config = Some(ArrayConfig::new(dims));
    b.map.header = Some(header_span);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "array 5x8 alu 2x8 ram\n\
        pae A0 at (0,0) op route in[w0] out[e0]\n\
        stream S0 in -> A0.w0\n\
        stream Y0 out <- A0.e0\n";

    #[test]
    fn minimal_program() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.alu_used(), 1);
        assert_eq!(c.streams.len(), 2);
        assert_eq!(c.dims, ArrayDims::default());
        assert_eq!(c.alus[0].inputs, vec!["w0"]);
    }

    #[test]
    fn row_out_of_range_points_at_row() {
        let text = "array 5x8 alu 2x8 ram\npae A0 at (5,0) op route in[w0] out[e0]\n";
        let d = parse(text).unwrap_err();
        let e = d.iter().find(|d| d.message.contains("row out of range")).unwrap();
        assert_eq!(e.span, Some(Span::new(2, 12, 13)));
    }

    #[test]
    fn collects_all_errors() {
        let text = "array 5x8 alu 2x8 ram\n\
            pae A0 at (0,0) op frobnicate in[w0] out[e0]\n\
            pae A1 at (0,1) op route in[w0 out[e0]\n\
            connect A1.e0 -> \n";
        let d = parse(text).unwrap_err();
        assert!(d.len() >= 3, "{d:?}");
        assert!(d.iter().any(|d| d.code == DiagCode::UnknownOpcode));
        let lines: Vec<usize> = d.iter().filter_map(|d| d.span.map(|s| s.line)).collect();
        assert!(lines.contains(&2) && lines.contains(&3) && lines.contains(&4));
    }

    #[test]
    fn missing_header() {
        let d = parse("").unwrap_err();
        assert_eq!(d[0].code, DiagCode::Header);
        let d = parse("pae A at (0,0) op route in[w0] out[e0]\n").unwrap_err();
        assert!(d.iter().all(|d| d.code == DiagCode::Header));
    }

    #[test]
    fn immediates_range_checked() {
        let text = "array 5x8 alu 2x8 ram\npae C at (0,0) op const imm 2147483648 in[] out[e0]\n";
        let d = parse(text).unwrap_err();
        assert_eq!(d[0].code, DiagCode::IntRange);
        let text = "array 5x8 alu 2x8 ram\npae C at (0,0) op const imm -0x80000000 in[] out[e0]\n";
        assert_eq!(parse(text).unwrap().alus[0].imms, vec![i32::MIN]);
    }

    #[test]
    fn dma_and_preload() {
        let text = "array 5x8 alu 2x8 ram cap 64\n\
            ram M0 at (left,0) mode fifo\n\
            preload M0 words 1,-2,0x3\n\
            preload M0 dma wgt base=4 l3=1:0 l2=1:0 l1=2:8 l0=3:1\n\
            stream S dma act base=0 l3=1:0 l2=1:0 l1=1:0 l0=5:1\n\
            stream S in -> M0.wr\n";
        let c = parse(text).unwrap();
        assert_eq!(c.dims.ram_capacity, 64);
        assert_eq!(c.rams[0].preload.len(), 2);
        assert_eq!(c.rams[0].preload_len(), 9);
        assert_eq!(c.streams[0].dma_len(), 5);
    }

    #[test]
    fn many() {
        let text = format!("# two passes\n{MINIMAL}{MINIMAL}");
        let cs = parse_many(&text).unwrap();
        assert_eq!(cs.len(), 2);
        assert!(parse(&text).is_err());
    }
}
