use tabprep::core::codec::{pack_decoded, unpack_decoded};
use tabprep::core::{DecodedRecord, FormatError, InputEncoding, PipelineConfig};
use tabprep::gen::{generate_file, GenSpec};
use tabprep::io::{convert_to_binary, create_output, read_output, RecordSink};
use tabprep::{read_source, run_columnwise, Error, RecordSource};

fn collect(src: &dyn RecordSource, width: usize) -> tabprep::Result<Vec<DecodedRecord>> {
    let mut all = Vec::new();
    src.scan(width, &mut |b| {
        all.extend_from_slice(b);
        Ok(())
    })?;
    Ok(all)
}

#[test]
fn file_sources_replay_and_agree() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("d.tsv");
    let bin = dir.path().join("d.bin");
    generate_file(&GenSpec::new(4000, 12).missing(0.1), &tsv).unwrap();
    assert_eq!(convert_to_binary(&tsv, &bin).unwrap(), 4000);

    let text = read_source(&tsv, InputEncoding::Utf8).unwrap();
    let binary = read_source(&bin, InputEncoding::Binary).unwrap();
    assert!(!text.is_in_memory());
    let first = collect(&text, 4).unwrap();
    assert_eq!(first, collect(&text, 1).unwrap());
    assert_eq!(first, collect(&binary, 4).unwrap());
    assert_eq!(first, collect(&binary, 4).unwrap());

    // Text rows here are longer than 160 bytes, so the binary form is smaller.
    let (t, b) = (
        std::fs::metadata(&tsv).unwrap().len(),
        std::fs::metadata(&bin).unwrap().len(),
    );
    assert_eq!(b, 24 + 160 * 4000);
    assert!(b < t);
}

#[test]
fn binary_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("d.tsv");
    let bin = dir.path().join("d.bin");
    generate_file(&GenSpec::new(30, 1), &tsv).unwrap();
    convert_to_binary(&tsv, &bin).unwrap();
    let bytes = std::fs::read(&bin).unwrap();

    let cut = dir.path().join("cut.bin");
    std::fs::write(&cut, &bytes[..24 + 17 * 160 + 90]).unwrap();
    let src = read_source(&cut, InputEncoding::Binary).unwrap();
    assert!(matches!(
        collect(&src, 4),
        Err(Error::Format(FormatError::ShortRead { record: 17 }))
    ));

    let whole_cut = dir.path().join("whole.bin");
    std::fs::write(&whole_cut, &bytes[..24 + 20 * 160]).unwrap();
    let src = read_source(&whole_cut, InputEncoding::Binary).unwrap();
    assert!(matches!(
        collect(&src, 4),
        Err(Error::Format(FormatError::RowCountMismatch { header: 30, actual: 20 }))
    ));

    let mut bad = bytes.clone();
    bad[4] = 9;
    std::fs::write(&cut, &bad).unwrap();
    assert!(matches!(
        read_source(&cut, InputEncoding::Binary),
        Err(Error::Format(FormatError::VersionMismatch { .. }))
    ));
    assert!(matches!(
        read_source(&tsv, InputEncoding::Binary),
        Err(Error::Format(FormatError::BadMagic))
    ));
}

#[test]
fn preprocess_text_equals_preprocess_binary() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("d.tsv");
    let bin = dir.path().join("d.bin");
    generate_file(&GenSpec::new(2500, 77).missing(0.3), &tsv).unwrap();
    convert_to_binary(&tsv, &bin).unwrap();
    let mut outs = Vec::new();
    for (path, enc) in [(&tsv, InputEncoding::Utf8), (&bin, InputEncoding::Binary)] {
        let out = dir.path().join(format!("{enc}.out"));
        let mut sink = create_output(&out).unwrap();
        run_columnwise(&read_source(path, enc).unwrap(), &PipelineConfig::default(), &mut sink)
            .unwrap();
        sink.finish().unwrap();
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(read_output(&outs[0]).unwrap().len(), 2500);
}

#[test]
fn spec_record_examples() {
    assert_eq!(pack_decoded(&DecodedRecord::default()), [0u8; 160]);
    let r = DecodedRecord {
        label: 1,
        ..Default::default()
    };
    assert_eq!(&pack_decoded(&r)[..4], &[1, 0, 0, 0]);
    assert_eq!(unpack_decoded(&pack_decoded(&r)), r);

    let mut t = tabprep::core::TransformedRecord::default();
    t.sparse[0] = 2;
    let mut sink = Vec::new();
    sink.write_batch(&[t]).unwrap();
    let packed = tabprep::io::pack_output(&sink);
    assert_eq!(&packed[24 + 56..24 + 60], &[2, 0, 0, 0]);
    assert!(packed[24 + 4..24 + 56].iter().all(|&b| b == 0));
}
