use std::path::{Path, PathBuf};

use longtail::dataio::{read_embedding_table, write_embedding_table, EmbeddingTable, LabelSpace};
use longtail::model::{
    init_parameters, read_checkpoint, sidecar_path, write_checkpoint, Checkpoint, CheckpointMeta,
    HeadShape,
};
use longtail::{rng, Matrix};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::{ensure, Outcome};

const GOLDEN_SHA256: &str = "961f87cdf81e59094e678b8db7064f0ce46d387bc7be44dc6f7c16e67f56ccfc";
const GOLDEN_IDS: [&str; 3] = ["obs-001", "obs-002", "obs-éß"];
const GOLDEN_BITS: [[u32; 4]; 3] = [
    [0x0000_0000, 0x8000_0000, 0x3f80_0000, 0xc020_0000],
    [0x3dcc_cccd, 0x0001_16c2, 0x7f7f_ffff, 0x8080_0000],
    [0x42f6_e979, 0xbbe5_6042, 0x477f_e000, 0x3eaa_aaab],
];

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden.emb1")
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn golden() -> Result<(), String> {
    let bytes = std::fs::read(golden_path()).map_err(|e| e.to_string())?;
    ensure(sha256_hex(&bytes) == GOLDEN_SHA256, || {
        "golden fixture checksum changed".into()
    })?;
    let table = EmbeddingTable::from_bytes(&bytes, &golden_path()).map_err(|e| e.to_string())?;
    ensure(table.row_ids() == GOLDEN_IDS, || {
        format!("ids {:?}", table.row_ids())
    })?;
    for (i, row) in GOLDEN_BITS.iter().enumerate() {
        let bits: Vec<u32> = table.row(i).iter().map(|v| v.to_bits()).collect();
        ensure(bits == row, || format!("row {i} bits {bits:x?}"))?;
    }
    let rows: Vec<Vec<f32>> = GOLDEN_BITS
        .iter()
        .map(|r| r.iter().map(|&b| f32::from_bits(b)).collect())
        .collect();
    let built = EmbeddingTable::new(
        Matrix::from_rows(&rows).unwrap(),
        GOLDEN_IDS.iter().map(|s| s.to_string()).collect(),
    )
    .map_err(|e| e.to_string())?;
    ensure(built.to_bytes() == bytes, || {
        "writer output differs from the golden bytes".into()
    })
}

fn emb1_round_trips(dir: &Path) -> Result<usize, String> {
    let mut r = rng::stream(77, &[]);
    let specials = [
        0.0f32,
        -0.0,
        f32::MIN_POSITIVE,
        1e-45,
        f32::MAX,
        f32::MIN,
        1.0 / 3.0,
    ];
    for case in 0..20 {
        let (n, d) = (r.random_range(1..40), r.random_range(1..30));
        let data: Vec<f32> = (0..n * d)
            .map(|_| {
                if r.random_bool(0.1) {
                    specials[r.random_range(0..specials.len())]
                } else {
                    f32::from_bits(r.random::<u32>() & 0xbf7f_ffff)
                }
            })
            .collect();
        let ids = (0..n).map(|i| format!("id-{case}-{i}-ü")).collect();
        let table = EmbeddingTable::new(Matrix::from_vec(n, d, data).unwrap(), ids)
            .map_err(|e| e.to_string())?;
        let path = dir.join(format!("t{case}.emb1"));
        write_embedding_table(&table, &path).map_err(|e| e.to_string())?;
        let back = read_embedding_table(&path).map_err(|e| e.to_string())?;
        ensure(back.bitwise_eq(&table), || {
            format!("case {case} changed on round trip")
        })?;
        let again = dir.join(format!("t{case}b.emb1"));
        write_embedding_table(&back, &again).map_err(|e| e.to_string())?;
        ensure(
            std::fs::read(&path).unwrap() == std::fs::read(&again).unwrap(),
            || format!("case {case} rewrote different bytes"),
        )?;
    }
    Ok(20)
}

fn checkpoint_round_trips(dir: &Path) -> Result<usize, String> {
    let shapes = [
        HeadShape::Linear { dim: 7, classes: 5 },
        HeadShape::Fusion {
            image_dim: 6,
            text_dim: 3,
            classes: 4,
        },
        HeadShape::Multi {
            dim: 5,
            classes: 6,
            genera: 3,
            species: 6,
        },
    ];
    for (i, shape) in shapes.into_iter().enumerate() {
        let c = shape.classes();
        let labels = LabelSpace::from_parts((0..c).map(|k| format!("c{k}")).collect(), vec![2; c]);
        let ckpt = Checkpoint {
            meta: CheckpointMeta::new(shape, labels),
            model: init_parameters(shape, 30 + i as u64),
        };
        let path = dir.join(format!("m{i}.ckp"));
        write_checkpoint(&ckpt, &path).map_err(|e| e.to_string())?;
        let back = read_checkpoint(&path).map_err(|e| e.to_string())?;
        let bits = |c: &Checkpoint| -> Vec<Vec<u32>> {
            c.records()
                .iter()
                .map(|t| t.data.iter().map(|v| v.to_bits()).collect())
                .collect()
        };
        ensure(back.meta == ckpt.meta && bits(&back) == bits(&ckpt), || {
            format!("checkpoint {i} changed on round trip")
        })?;
        let again = dir.join(format!("m{i}b.ckp"));
        write_checkpoint(&back, &again).map_err(|e| e.to_string())?;
        let same = |a: &Path, b: &Path| std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
        ensure(
            same(&path, &again) && same(&sidecar_path(&path), &sidecar_path(&again)),
            || format!("checkpoint {i} rewrote different bytes"),
        )?;
    }
    Ok(shapes.len())
}

pub fn check() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    golden()?;
    let tables = emb1_round_trips(dir.path())?;
    let ckpts = checkpoint_round_trips(dir.path())?;
    Ok(format!(
        "golden EMB1 bytes and sha256 match, {tables} EMB1 and {ckpts} checkpoint round trips bitwise"
    ))
}
