//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs on the committed synthetic fixtures only.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use regionkit::annotations::{load_regions, read_json, CocoFile, ImageRegions};
use regionkit::{ospe, pipeline};
use regionkit_core::eval::{cider, recognition_metrics, semantic_iou, LabeledImage, LabeledSegment, LabeledSegments};
use regionkit_core::extractor::{mask_pool, ExtractorDims, ExtractorWeights, FeatureMap, PoolingMode, LEVELS};
use regionkit_core::forge::negatives::{class_negative_candidates, record_polarity};
use regionkit_core::forge::templates::{BRIEF_DESCRIPTION_QUESTIONS, CATEGORY_QUESTIONS, DETAILED_DESCRIPTION_QUESTIONS};
use regionkit_core::forge::{build_balanced_yesno, build_object_prompt_job, build_part_prompt_job, ingest_response, JobType, Task};
use regionkit_core::forge::fewshot::{market_context, part_context};
use regionkit_core::mask::{rle_from_string, RleMask};
use regionkit_core::sequence::{assemble_conversation, reconstruct, render_plain, Conversation, Role, Segment, Turn};
use regionkit_core::BinaryMask;

type Check = Result<(), String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn core_fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run_cases<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mask_strategy(max: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max, 1..=max, 0.0f64..1.0).prop_flat_map(|(h, w, density)| {
        proptest::collection::vec(proptest::bool::weighted(density.clamp(0.01, 0.99)), h * w)
            .prop_map(move |bits| BinaryMask::new(h, w, bits).unwrap())
    })
}

fn rle_round_trip() -> Check {
    run_cases(1000, mask_strategy(64), |mask| {
        let (h, w) = (mask.height(), mask.width());
        let rle = RleMask::encode(&mask);
        prop_assert_eq!(&rle.counts, &oracles::rle_counts(h, w, mask.bits()));
        prop_assert_eq!(&rle.decode().unwrap(), &mask);
        let s = rle.to_compact_string();
        prop_assert_eq!(&s, &oracles::rle_string(&rle.counts));
        prop_assert_eq!(&rle_from_string(&s).unwrap(), &rle.counts);
        prop_assert_eq!(&oracles::rle_unstring(&s), &rle.counts);
        prop_assert_eq!(RleMask::from_compact_string(&s, h, w).unwrap(), rle);
        Ok(())
    })
}

fn pool_oracle() -> Check {
    let strategy = (0u32..4, 1usize..6, 1usize..6, 1usize..5, any::<u64>(), 0.05f64..0.95);
    run_cases(500, strategy, |(sp, gh, gw, channels, seed, density)| {
        let stride = 1usize << sp;
        let (h, w) = (gh * stride, gw * stride);
        let mut rng = TestRng::from_seed(RngAlgorithm::ChaCha, &seed.to_le_bytes().repeat(4));
        let mut bits: Vec<bool> = (0..h * w).map(|_| rng.random_bool(density)).collect();
        bits[0] = true;
        let feat: Vec<Vec<Vec<f32>>> = (0..channels)
            .map(|_| (0..gh).map(|_| (0..gw).map(|_| rng.random_range(-2.0f32..2.0)).collect()).collect())
            .collect();
        let map = FeatureMap::from_fn(channels, gh, gw, |c, r, k| feat[c][r][k]).unwrap();
        let mask = BinaryMask::new(h, w, bits.clone()).unwrap();
        for (mode, want) in [
            (PoolingMode::Fractional, oracles::pool_fractional(h, w, &bits, &feat, stride)),
            (PoolingMode::Binary, oracles::pool_binary(h, w, &bits, &feat, stride)),
        ] {
            let got = mask_pool(&mask, &map, stride, mode).unwrap();
            for (g, e) in got.iter().zip(&want) {
                prop_assert!((g - e).abs() <= 1e-6 * e.abs().max(1e-12), "{:?}: {} vs {}", mode, g, e);
            }
        }
        Ok(())
    })
}

fn small_dims() -> ExtractorDims {
    ExtractorDims { level_channels: [6, 5, 4, 3], hidden: 8, out: 4 }
}

fn rows(l: &regionkit_core::extractor::Linear) -> Vec<&[f32]> {
    (0..l.out_dim).map(|o| &l.weight[o * l.in_dim..(o + 1) * l.in_dim]).collect()
}

fn fusion_structure() -> Check {
    let dims = small_dims();
    let seeded: Vec<ExtractorWeights> = (0..20u64).map(|s| ExtractorWeights::init(s, dims).unwrap()).collect();
    for (seed, w) in seeded.iter().enumerate() {
        let zeros: [Vec<f64>; LEVELS] = core::array::from_fn(|j| vec![0.0; dims.level_channels[j]]);
        let mut bias_sum = vec![0.0f64; dims.hidden];
        for p in &w.projections {
            for (s, b) in bias_sum.iter_mut().zip(&p.bias) {
                *s += *b as f64;
            }
        }
        let hidden: Vec<f64> = oracles::affine(&rows(&w.fusion_in), &w.fusion_in.bias, &bias_sum)
            .into_iter()
            .map(oracles::gelu)
            .collect();
        let want: Vec<f32> = oracles::affine(&rows(&w.fusion_out), &w.fusion_out.bias, &hidden)
            .into_iter()
            .map(|v| v as f32)
            .collect();
        ensure(w.fuse_pre(&zeros).unwrap() == bias_sum, || format!("seed {seed}: pre-MLP sum is not the bias sum"))?;
        ensure(w.fuse_tokens(&zeros).unwrap() == want, || format!("seed {seed}: zero-input token differs"))?;
    }
    let strategy = (0..seeded.len(), -2.0f64..2.0, proptest::collection::vec(-1.0f64..1.0, 36));
    run_cases(200, strategy, |(seed, alpha, v)| {
        let w = &seeded[seed];
        let split = |off: usize| -> [Vec<f64>; LEVELS] {
            let mut k = off;
            core::array::from_fn(|j| {
                let n = dims.level_channels[j];
                k += n;
                v[k - n..k].to_vec()
            })
        };
        let (a, b) = (split(0), split(18));
        let mix: [Vec<f64>; LEVELS] =
            core::array::from_fn(|j| a[j].iter().zip(&b[j]).map(|(p, q)| alpha * p + (1.0 - alpha) * q).collect());
        let (fa, fb, fm) = (w.fuse_pre(&a).unwrap(), w.fuse_pre(&b).unwrap(), w.fuse_pre(&mix).unwrap());
        for k in 0..fm.len() {
            let want = alpha * fa[k] + (1.0 - alpha) * fb[k];
            prop_assert!((fm[k] - want).abs() <= 1e-6 * want.abs().max(1.0));
        }
        Ok(())
    })
}

fn spatial_token() -> Check {
    let w = ExtractorWeights::init(7, small_dims()).unwrap();
    for (h, wd) in [(224, 224), (100, 37), (512, 512), (1, 1)] {
        let zero = w.spatial_token(&BinaryMask::zeros(h, wd).unwrap()).map_err(|e| e.to_string())?;
        ensure(zero == w.spatial.bias, || format!("{h}x{wd}: zero mask is not the bias"))?;
        let full = w.spatial_token(&BinaryMask::ones(h, wd).unwrap()).map_err(|e| e.to_string())?;
        for (o, got) in full.iter().enumerate() {
            let row = &w.spatial.weight[o * 50176..(o + 1) * 50176];
            let want = row.iter().map(|&x| x as f64).sum::<f64>() + w.spatial.bias[o] as f64;
            ensure((*got as f64 - want).abs() <= 1e-6 * want.abs().max(1.0), || format!("{h}x{wd} row {o}: {got} vs {want}"))?;
        }
    }
    Ok(())
}

fn conversation_strategy() -> impl Strategy<Value = Conversation> {
    let piece = prop_oneof![
        3 => "[a-zA-Z ,.?!\n]{0,12}",
        1 => Just("<region>".to_string()),
        1 => Just("<regio".to_string()),
    ];
    let text = proptest::collection::vec(piece, 0..8).prop_map(|p| p.concat());
    proptest::collection::vec((text, proptest::collection::vec(0u32..50, 8)), 1..6).prop_map(|turns| {
        let turns = turns
            .into_iter()
            .enumerate()
            .map(|(i, (text, ids))| {
                let text = if text.is_empty() { "?".to_string() } else { text };
                let bindings = (0..text.matches("<region>").count()).map(|k| ids[k % 8]).collect();
                Turn::new(if i % 2 == 0 { Role::Human } else { Role::Assistant }, text, bindings)
            })
            .collect();
        Conversation::new(turns)
    })
}

fn sequence_protocol() -> Check {
    run_cases(200, (conversation_strategy(), any::<bool>()), |(conv, prefix)| {
        let segs = assemble_conversation(&conv, prefix).unwrap();
        let (text, ids) = reconstruct(&segs);
        prop_assert_eq!(text, render_plain(&conv, prefix));
        let bound: Vec<u32> = conv.turns.iter().flat_map(|t| t.bindings.clone()).collect();
        prop_assert_eq!(ids, bound);
        let markers: usize = conv.turns.iter().map(|t| t.marker_count()).sum();
        prop_assert_eq!(segs.iter().filter(|s| matches!(s, Segment::MaskToken(_))).count(), markers);
        prop_assert_eq!(segs.iter().filter(|s| matches!(s, Segment::SpatialToken(_))).count(), markers);
        Ok(())
    })
}

fn lvis_subset() -> Vec<ImageRegions> {
    let path = fixture("lvis_subset.json");
    let coco: CocoFile = read_json(&path).unwrap();
    load_regions(&coco, &HashMap::new(), &path).unwrap()
}

fn negative_mining() -> Check {
    let images = lvis_subset();
    let total: usize = images.iter().map(|i| i.regions.len()).sum();
    ensure(total == 200, || format!("fixture has {total} regions"))?;
    let table = ospe::read(&fixture("embeddings.ospe")).map_err(|e| e.to_string())?;
    let vectors: Vec<Vec<f32>> = (0..table.len()).map(|i| table.vector_at(i).to_vec()).collect();

    let mined = pipeline::mine_negatives(&images, Some(&table), 17).map_err(|e| e.to_string())?;
    ensure(mined.len() == 200, || format!("{} mined entries", mined.len()))?;
    let by_key: BTreeMap<(&str, u32), _> = mined.iter().map(|m| ((m.image_ref.as_str(), m.region_id), m)).collect();
    for img in &images {
        let centroids: Vec<(f64, f64)> = img
            .regions
            .iter()
            .map(|r| oracles::centroid(img.height, img.width, r.mask.decode().unwrap().bits()))
            .collect();
        for (t, r) in img.regions.iter().enumerate() {
            let m = by_key[&(img.image_ref.as_str(), r.region_id)];
            let q = table.position(&r.category).ok_or("category missing from table")?;
            let allowed = oracles::top8(q, &vectors);
            let pool = class_negative_candidates(&r.category, &table).map_err(|e| e.to_string())?;
            ensure(pool.len() == 8 && pool.iter().all(|i| allowed.contains(i)), || format!("region {}: pool {pool:?}", r.region_id))?;
            let class = m.class.as_deref().ok_or("no class negative")?;
            ensure(class != r.category, || format!("region {}: class negative equals the query", r.region_id))?;
            ensure(allowed.contains(&table.position(class).unwrap()), || format!("region {}: {class} outside top-8", r.region_id))?;

            let dist = |i: usize| (centroids[i].0 - centroids[t].0).powi(2) + (centroids[i].1 - centroids[t].1).powi(2);
            let others: Vec<usize> = (0..img.regions.len()).filter(|&i| img.regions[i].category != r.category).collect();
            let best = others.iter().map(|&i| dist(i)).fold(f64::INFINITY, f64::min);
            let nearest: Vec<&str> = others.iter().filter(|&&i| dist(i) <= best + 1e-9).map(|&i| img.regions[i].category.as_str()).collect();
            match &m.spatial {
                Some(s) => ensure(nearest.contains(&s.as_str()), || format!("region {}: spatial {s}, oracle {nearest:?}", r.region_id))?,
                None => ensure(others.is_empty(), || format!("region {}: no spatial negative", r.region_id))?,
            }
        }
    }

    let (mut yes, mut no) = (0usize, 0usize);
    for img in &images {
        let recs = build_balanced_yesno(&img.image_ref, &img.regions, Some(&table), 23).map_err(|e| e.to_string())?;
        for rec in &recs {
            match record_polarity(rec) {
                Some(true) => yes += 1,
                Some(false) => no += 1,
                None => return Err("yes/no record without a recognizable answer".into()),
            }
        }
    }
    ensure(yes == no && yes == 200, || format!("yes/no split {yes}/{no}"))
}

fn prompt_templates() -> Check {
    for (job, file) in [
        (JobType::Description, "prompts/description_system.txt"),
        (JobType::Conversation, "prompts/conversation_system.txt"),
        (JobType::ShortForm, "prompts/short_form_system.txt"),
        (JobType::PartAttributes, "prompts/part_system.txt"),
    ] {
        ensure(job.system_prompt() == core_fixture(file), || format!("{file} differs"))?;
    }
    let lines = |f: &str| core_fixture(f).lines().map(String::from).collect::<Vec<_>>();
    ensure(DETAILED_DESCRIPTION_QUESTIONS.to_vec() == lines("prompts/detailed_questions.txt"), || "detailed questions differ".into())?;
    ensure(BRIEF_DESCRIPTION_QUESTIONS.to_vec() == lines("prompts/brief_questions.txt"), || "brief questions differ".into())?;
    ensure(CATEGORY_QUESTIONS.to_vec() == lines("prompts/category_questions.txt"), || "category questions differ".into())
}

fn ingestion() -> Check {
    let ctx = market_context();
    let job = build_object_prompt_job(&ctx, JobType::Conversation).map_err(|e| e.to_string())?;
    let recs = ingest_response(&job, &ctx, &core_fixture("market_conversation.txt"), 0).map_err(|e| e.to_string())?;
    ensure(recs.len() == 1 && recs[0].task == Task::Conversation, || format!("{} conversation records", recs.len()))?;
    ensure(recs[0].conversation.exchanges() == 5, || format!("{} exchanges", recs[0].conversation.exchanges()))?;

    let ctx = part_context();
    let job = build_part_prompt_job(&ctx).map_err(|e| e.to_string())?;
    let recs = ingest_response(&job, &ctx, &core_fixture("spoon_bowl_part_qa.txt"), 0).map_err(|e| e.to_string())?;
    ensure(recs.len() == 1 && recs[0].task == Task::PartQa, || format!("{} part records", recs.len()))?;
    ensure(recs[0].conversation.exchanges() == 8, || format!("{} part pairs", recs[0].conversation.exchanges()))
}

fn block(cells: std::ops::Range<usize>) -> RleMask {
    BinaryMask::from_fn(4, 4, |r, c| cells.contains(&(r * 4 + c))).unwrap().to_rle()
}

fn segments(parts: &[(std::ops::Range<usize>, &str, &str)]) -> LabeledSegments {
    LabeledSegments {
        images: vec![LabeledImage {
            image_ref: "x".into(),
            segments: parts
                .iter()
                .map(|(cells, gt, pred)| LabeledSegment { mask: block(cells.clone()), gt: gt.to_string(), pred: pred.to_string() })
                .collect(),
        }],
        vocabulary: vec!["a".into(), "b".into()],
    }
}

fn metrics() -> Check {
    for (p, g, want) in [("red car", "car red", 1.0), ("a dog", "a cat", 1.0 / 3.0), ("big dog", "small dog", 1.0 / 3.0), ("blue car", "blue", 0.5), ("cat", "dog", 0.0)] {
        let got = semantic_iou(p, g).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("S-IoU({p:?}, {g:?}) = {got}, want {want}"))?;
    }

    let word = prop::sample::select(vec!["a", "man", "red", "dog", "on", "the", "grass", "runs", "small", "white", "cat", "table"]);
    let sentence = proptest::collection::vec(word, 1..9).prop_map(|w| w.join(" "));
    let corpus = (2usize..7).prop_flat_map(move |n| {
        (
            proptest::collection::vec(sentence.clone(), n),
            proptest::collection::vec(proptest::collection::vec(sentence.clone(), 1..5), n),
        )
    });
    run_cases(100, corpus, |(cands, refs)| {
        let got = cider(&cands, &refs).unwrap();
        let want = oracles::cider(&cands, &refs);
        for (g, w) in got.per_image.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-6, "{} vs {}", g, w);
        }
        prop_assert!((got.mean - want.iter().sum::<f64>() / want.len() as f64).abs() <= 1e-6);
        Ok(())
    })?;

    let exact = |segs: LabeledSegments, pq: f64, miou: f64, name: &str| -> Check {
        let m = recognition_metrics(&segs).map_err(|e| e.to_string())?;
        ensure((m.pq - pq).abs() < 1e-9 && (m.miou - miou).abs() < 1e-9, || format!("{name}: PQ {} mIoU {}", m.pq, m.miou))
    };
    exact(segments(&[(0..4, "a", "a"), (4..8, "b", "b")]), 100.0, 100.0, "perfect")?;
    exact(segments(&[(0..4, "a", "b"), (4..8, "b", "a")]), 0.0, 0.0, "null")?;
    exact(
        segments(&[(0..4, "a", "a"), (4..8, "a", "b"), (8..10, "b", "b")]),
        100.0 * 2.0 / 3.0,
        100.0 * (4.0 / 8.0 + 2.0 / 6.0) / 2.0,
        "three segments",
    )
}

fn cli(args: &[&str]) -> Result<PathBuf, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_regionkit")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    Ok(PathBuf::from(stdout.lines().last().unwrap_or_default()))
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("run.toml");
    let text = format!(
        "[paths]\nannotations = {:?}\nrefs = {:?}\ndescriptions = {:?}\nembeddings = {:?}\nfeatures = {:?}\nmasks = {:?}\n[seeds]\nforge = 4\nextract = 9\n[dims]\nhidden = 64\nout = 32\n",
        fixture("instances.json"),
        fixture("refs.json"),
        fixture("descriptions.json"),
        fixture("embeddings.ospe"),
        fixture("features.ospt"),
        fixture("masks.jsonl"),
    );
    std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
    let lvis = tmp.path().join("lvis.toml");
    std::fs::write(
        &lvis,
        format!("[paths]\nannotations = {:?}\nembeddings = {:?}\n[seeds]\nforge = 4\n", fixture("lvis_subset.json"), fixture("embeddings.ospe")),
    )
    .map_err(|e| e.to_string())?;
    for (config, command) in [(&cfg, "forge"), (&cfg, "extract"), (&lvis, "forge")] {
        let mut seen: Option<BTreeMap<String, Vec<u8>>> = None;
        for (i, workers) in ["1", "3", "8", "8"].iter().enumerate() {
            let out = tmp.path().join(format!("{command}-{i}"));
            let dir = cli(&["-c", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "-j", workers, command])?;
            let bytes = dir_bytes(&dir);
            match &seen {
                None => seen = Some(bytes),
                Some(first) => ensure(first == &bytes, || format!("{command}: outputs differ at {workers} workers"))?,
            }
        }
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, Option<Duration>, fn() -> Check); 10] = [
        ("RLE round-trip (1000 masks)", Some(Duration::from_secs(5)), rle_round_trip),
        ("mask pooling vs oracle (500 pairs)", Some(Duration::from_secs(10)), pool_oracle),
        ("fusion structure", Some(Duration::from_secs(5)), fusion_structure),
        ("spatial token", Some(Duration::from_secs(5)), spatial_token),
        ("sequence protocol (200 conversations)", Some(Duration::from_secs(5)), sequence_protocol),
        ("negative mining (200 regions)", Some(Duration::from_secs(10)), negative_mining),
        ("prompt templates snapshot", None, prompt_templates),
        ("ingestion of example responses", None, ingestion),
        ("metrics", Some(Duration::from_secs(30)), metrics),
        ("determinism across worker counts", None, determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let result = result.and_then(|()| match budget {
            Some(b) if took > b => Err(format!("took {took:.2?}, budget {b:?}")),
            _ => Ok(()),
        });
        match result {
            Ok(()) => println!("PASS  {name}  ({took:.2?})"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}  ({took:.2?}): {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
