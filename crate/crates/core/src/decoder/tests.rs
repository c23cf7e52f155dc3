use super::*;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;

/// Independent parser: splits on `\n` and `\t` and leans on `str::parse`.
/// Only covers well-formed input.
fn oracle_row(line: &str) -> [u32; 40] {
    let cols: Vec<&str> = line.split('\t').collect();
    assert_eq!(cols.len(), 40, "oracle only handles 40-field rows");
    let mut out = [0u32; 40];
    for (i, c) in cols.iter().enumerate() {
        out[i] = if c.is_empty() || *c == "-" {
            0
        } else if i < 14 {
            c.parse::<i32>().unwrap() as u32
        } else {
            u32::from_str_radix(c, 16).unwrap()
        };
    }
    out
}

fn row_text(fields: &[&str]) -> String {
    let mut s = fields.join("\t");
    s.push('\n');
    s
}

fn fields_of(records: &[DecodedRecord]) -> Vec<[u32; 40]> {
    records.iter().map(|r| r.fields()).collect()
}

#[test]
fn classify_examples() {
    assert_eq!(classify_byte(b'7'), ByteToken::Digit(7));
    assert_eq!(classify_byte(0x09), ByteToken::Tab);
    assert_eq!(classify_byte(b'\n'), ByteToken::Newline);
    assert_eq!(classify_byte(b'-'), ByteToken::Minus);
    assert_eq!(classify_byte(b'a'), ByteToken::HexLetter(10));
    assert_eq!(classify_byte(b'f'), ByteToken::HexLetter(15));
    assert_eq!(classify_byte(b'g'), ByteToken::Invalid);
    assert_eq!(classify_byte(b'A'), ByteToken::Invalid);
    assert_eq!(classify_byte(b'\r'), ByteToken::Invalid);
    // Total: every byte gets exactly one class, and only 19 are valid.
    let valid = (0u8..=255)
        .filter(|&b| classify_byte(b) != ByteToken::Invalid)
        .count();
    assert_eq!(valid, 2 + 1 + 10 + 6);
}

#[test]
fn decode_example_row() {
    let mut fields = vec![""; 40];
    fields[0] = "0";
    fields[1] = "1";
    fields[2] = "-5";
    fields[39] = "68ab";
    let text = row_text(&fields);
    let expected = oracle_row(text.trim_end_matches('\n'));
    for records in [decode_scalar(text.as_bytes()), decode_group(text.as_bytes())] {
        let records = records.unwrap();
        assert_eq!(records.len(), 1);
        let r = records[0];
        assert_eq!(r.label, 0);
        assert_eq!(r.dense[0], 1);
        assert_eq!(r.dense[1], -5);
        assert_eq!(r.sparse[25], 0x68ab);
        assert_eq!(r.fields(), expected);
    }
}

#[test]
fn all_empty_row_is_zero() {
    let text = row_text(&[""; 40]);
    assert_eq!(text.len(), 40);
    for d in [decode_scalar(text.as_bytes()), decode_group(text.as_bytes())] {
        assert_eq!(d.unwrap(), vec![DecodedRecord::default()]);
    }
}

#[test]
fn short_row_is_arity_error() {
    let text = row_text(&["1"; 39]);
    let err = DecodeError::Arity { row: 0, fields: 39 };
    assert_eq!(decode_scalar(text.as_bytes()), Err(err));
    assert_eq!(decode_group(text.as_bytes()), Err(err));

    let mut long = vec!["1"; 41];
    long[0] = "0";
    let text = row_text(&long);
    let err = DecodeError::Arity { row: 0, fields: 41 };
    assert_eq!(decode_scalar(text.as_bytes()), Err(err));
    assert_eq!(decode_group(text.as_bytes()), Err(err));
}

#[test]
fn trailing_row_without_newline() {
    let mut text = row_text(&["3"; 40]);
    text.push_str(&row_text(&["4"; 40]));
    text.pop();
    let rows = decode_group(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].sparse[0], 4);
    assert_eq!(decode_scalar(text.as_bytes()).unwrap(), rows);
    assert!(decode_scalar(b"").unwrap().is_empty());
}

#[test]
fn zero_and_sign() {
    let mut f = vec!["0"; 40];
    f[1] = "";
    f[2] = "-0";
    f[3] = "-";
    f[4] = "-2147483647";
    f[5] = "2147483647";
    f[6] = "-17";
    f[14] = "";
    f[15] = "00000000";
    f[16] = "ffffffff";
    let text = row_text(&f);
    let r = decode_group(text.as_bytes()).unwrap()[0];
    assert_eq!(&r.dense[..6], &[0, 0, 0, -2147483647, 2147483647, -17]);
    assert_eq!(&r.sparse[..3], &[0, 0, u32::MAX]);
    // -17 is stored as its two's complement bit pattern.
    assert_eq!(r.fields()[6], (17u32).wrapping_neg());
    assert_eq!(decode_scalar(text.as_bytes()).unwrap()[0], r);
}

#[test]
fn rejected_bytes() {
    let cases: &[(usize, &str, u8)] = &[
        (14, "ABCD", b'A'),  // uppercase hex
        (1, "12\r", b'\r'),  // carriage return
        (2, "1-2", b'-'),    // minus after digits
        (3, "--1", b'-'),    // double minus
        (14, "-1", b'-'),    // minus in sparse column
        (5, "1a", b'a'),     // hex letter in dense column
        (0, " 1", b' '),
    ];
    for &(col, text, byte) in cases {
        let mut f = vec![""; 40];
        f[col] = text;
        let row = row_text(&f);
        let want = DecodeError::InvalidByte { row: 0, col, byte };
        assert_eq!(decode_scalar(row.as_bytes()), Err(want), "{text:?}");
        assert_eq!(decode_group(row.as_bytes()), Err(want), "{text:?}");
    }
}

#[test]
fn overflow() {
    for (col, text) in [(1, "2147483648"), (1, "-2147483648"), (20, "123456789"), (20, "000000000")] {
        let mut f = vec![""; 40];
        f[col] = text;
        let row = row_text(&f);
        let want = DecodeError::FieldOverflow { row: 0, col };
        assert_eq!(decode_scalar(row.as_bytes()), Err(want), "{text:?}");
        assert_eq!(decode_group(row.as_bytes()), Err(want), "{text:?}");
    }
}

#[test]
fn errors_are_sticky_and_rows_counted() {
    let good = row_text(&["1"; 40]);
    let mut text = good.repeat(3);
    text.push_str("x\n");
    let mut d = GroupDecoder::new();
    let mut n = 0;
    // 242 bytes: the last two sit in the pending group until finish().
    assert!(d.feed(text.as_bytes(), &mut |_| n += 1).is_ok());
    let err = d.finish(&mut |_| n += 1).unwrap_err();
    assert_eq!(n, 3);
    assert_eq!(err, DecodeError::InvalidByte { row: 3, col: 0, byte: b'x' });
    assert_eq!(d.feed(good.as_bytes(), &mut |_| n += 1), Err(err));
    assert_eq!(d.finish(&mut |_| n += 1), Err(err));
    assert_eq!(n, 3);
    assert_eq!(err.offset_rows(10).row(), 13);
}

// ---------------------------------------------------------------------------
// Fuzzed equivalence between the two decoders.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
enum Field {
    Dec { neg: bool, digits: Vec<u8> },
    Hex(Vec<u8>),
    Junk(Vec<u8>),
}

fn arb_field(col: usize) -> BoxedStrategy<Field> {
    let dec = (any::<bool>(), proptest::collection::vec(0u8..10, 0..=11))
        .prop_map(|(neg, digits)| Field::Dec { neg, digits });
    let hex = proptest::collection::vec(0u8..16, 0..=9).prop_map(Field::Hex);
    let junk = proptest::collection::vec(
        prop_oneof![Just(b'-'), Just(b'A'), Just(b'\r'), Just(b'g'), Just(b'\t'), Just(b'\n'), b'0'..=b'9'],
        1..4,
    )
    .prop_map(Field::Junk);
    if col < 14 {
        prop_oneof![20 => dec, 1 => hex, 1 => junk].boxed()
    } else {
        prop_oneof![20 => hex, 1 => dec, 1 => junk].boxed()
    }
}

fn render(field: &Field, out: &mut Vec<u8>) {
    const HEXCH: &[u8; 16] = b"0123456789abcdef";
    match field {
        Field::Dec { neg, digits } => {
            if *neg {
                out.push(b'-');
            }
            out.extend(digits.iter().map(|d| b'0' + d));
        }
        Field::Hex(n) => out.extend(n.iter().map(|&d| HEXCH[d as usize])),
        Field::Junk(j) => out.extend_from_slice(j),
    }
}

fn arb_row() -> impl Strategy<Value = Vec<u8>> {
    let fields: Vec<_> = (0..40).map(arb_field).collect();
    (fields, prop_oneof![30 => Just(40usize), 1 => 38usize..=42]).prop_map(|(fields, arity)| {
        let mut out = Vec::new();
        for i in 0..arity {
            if i > 0 {
                out.push(b'\t');
            }
            render(&fields[i % 40], &mut out);
        }
        out.push(b'\n');
        out
    })
}

fn arb_stream() -> impl Strategy<Value = (Vec<u8>, Vec<usize>)> {
    (
        proptest::collection::vec(arb_row(), 0..12),
        any::<bool>(),
        proptest::collection::vec(any::<usize>(), 0..6),
    )
        .prop_map(|(rows, drop_last_nl, cuts)| {
            let mut bytes: Vec<u8> = rows.concat();
            if drop_last_nl && bytes.last() == Some(&b'\n') {
                bytes.pop();
            }
            (bytes, cuts)
        })
}

fn split<'a>(bytes: &'a [u8], cuts: &[usize]) -> Vec<&'a [u8]> {
    let mut offs: Vec<usize> = cuts
        .iter()
        .map(|c| if bytes.is_empty() { 0 } else { c % (bytes.len() + 1) })
        .collect();
    offs.sort_unstable();
    let mut chunks = Vec::new();
    let mut start = 0;
    for o in offs {
        chunks.push(&bytes[start..o]);
        start = o;
    }
    chunks.push(&bytes[start..]);
    chunks
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn group_matches_scalar((bytes, cuts) in arb_stream()) {
        let whole = decode_chunks(ScalarDecoder::new(), &[&bytes]);
        let chunks = split(&bytes, &cuts);
        let grouped = decode_chunks(GroupDecoder::new(), &chunks);
        prop_assert_eq!(&grouped, &whole);
        let scalar_chunked = decode_chunks(ScalarDecoder::new(), &chunks);
        prop_assert_eq!(&scalar_chunked, &whole);
    }

    #[test]
    fn valid_rows_match_string_oracle(rows in proptest::collection::vec(
        (any::<i32>().prop_filter("magnitude", |v| *v != i32::MIN), any::<u32>(), 0usize..13, 0usize..26), 0..20)
    ) {
        let mut text = String::new();
        for (dense, sparse, dc, sc) in &rows {
            let mut f: Vec<String> = vec![String::new(); 40];
            f[0] = "1".into();
            f[1 + dc] = alloc::format!("{dense}");
            f[14 + sc] = alloc::format!("{sparse:x}");
            let refs: Vec<&str> = f.iter().map(|s| s.as_str()).collect();
            text.push_str(&row_text(&refs));
        }
        let expected: Vec<[u32; 40]> = text.lines().map(oracle_row).collect();
        prop_assert_eq!(fields_of(&decode_scalar(text.as_bytes()).unwrap()), expected.clone());
        prop_assert_eq!(fields_of(&decode_group(text.as_bytes()).unwrap()), expected);
    }

    #[test]
    fn empty_and_zero_agree(col in 1usize..40, zero in prop_oneof![Just("0"), Just(""), Just("0000")]) {
        let mut f = vec![""; 40];
        f[col] = zero;
        let r = decode_group(row_text(&f).as_bytes()).unwrap();
        prop_assert_eq!(r, vec![DecodedRecord::default()]);
    }

    #[test]
    fn negation_is_twos_complement(x in 0u32..=i32::MAX as u32) {
        let mut f = vec![""; 40];
        let neg = alloc::format!("-{x}");
        f[7] = &neg;
        let r = decode_scalar(row_text(&f).as_bytes()).unwrap()[0];
        prop_assert_eq!(r.fields()[7], x.wrapping_neg());
    }
}
