//! The four subcommands. Each resolves its settings, runs the library
//! pipeline and reports on stdout; errors bubble up to the exit code.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nseg::corpusio::{self, EvalResult};
use nseg::decoder;
use nseg::encoders::{ModelRole, ScoringModel};
use nseg::modelio;
use nseg::pretrainer::{self, PretrainSources};
use nseg::trainer;
use nseg::vocab::Vocab;
use nseg::{Error, Result};

use crate::settings::Settings;
use crate::{EvalArgs, PretrainArgs, SegmentArgs, SettingsArgs, TrainArgs};

fn resolve_settings(args: &SettingsArgs) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        s.apply_file(path)?;
    }
    for pair in &args.set {
        let Some((k, v)) = pair.split_once('=') else {
            return Err(Error::Usage(format!("--set `{pair}` is not key=value")));
        };
        s.apply(k.trim(), v.trim())?;
    }
    if let Some(mode) = &args.char_mode {
        s.apply("char_mode", mode)?;
    }
    if let Some(mode) = &args.word_mode {
        s.apply("word_mode", mode)?;
    }
    Ok(s)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads an embedding file into one of the model's tables.
fn load_embeddings_into(
    model: &mut ScoringModel,
    table: &str,
    path: Option<&Path>,
) -> Result<()> {
    let Some(path) = path else {
        return Ok(());
    };
    let Some(id) = model.params.lookup(table) else {
        return Err(Error::Usage(format!(
            "the model has no `{table}` table to load embeddings into"
        )));
    };
    let coverage = match table {
        "emb.char" => corpusio::load_embeddings(path, model.params.get_mut(id), &model.chars)?,
        "emb.bichar" => corpusio::load_embeddings(path, model.params.get_mut(id), &model.bigrams)?,
        "emb.word" => corpusio::load_embeddings(path, model.params.get_mut(id), &model.words)?,
        other => {
            return Err(Error::Usage(format!(
                "`{other}` is not a loadable embedding table"
            )))
        }
    };
    println!(
        "{table}: loaded {} of {} rows from {}",
        coverage.covered,
        coverage.total,
        path.display()
    );
    if coverage.duplicate_tokens > 0 {
        println!(
            "{table}: {} duplicate tokens in the file, last occurrence kept",
            coverage.duplicate_tokens
        );
    }
    Ok(())
}

pub fn pretrain(args: &PretrainArgs) -> Result<()> {
    let mut settings = resolve_settings(&args.settings)?;
    if let Some(epochs) = args.epochs {
        settings.pretrain.epochs = epochs;
    }
    if let Some(seed) = args.seed {
        settings.pretrain.seed = seed;
    }
    if args.settings.print_config {
        print!("{}", settings.render());
        return Ok(());
    }

    let sources = PretrainSources {
        punc: match &args.punc {
            Some(p) => corpusio::read_raw(p)?,
            None => Vec::new(),
        },
        autoseg: match &args.autoseg {
            Some(p) => corpusio::read_segmented(p)?,
            None => Vec::new(),
        },
        hetero: match &args.hetero {
            Some(p) => corpusio::read_segmented(p)?,
            None => Vec::new(),
        },
        pos: match &args.pos {
            Some(p) => corpusio::read_pos(p, &args.pos_delim)?,
            None => Vec::new(),
        },
    };
    if sources.enabled_tasks().is_empty() {
        return Err(Error::Usage(
            "give at least one non-empty corpus via --punc/--autoseg/--hetero/--pos".into(),
        ));
    }

    let (chars, bigrams) = sources.build_vocabs(&settings.pretrain.punct);
    let heads = sources.build_heads();
    let mut init = ChaCha8Rng::seed_from_u64(settings.pretrain.seed);
    let mut model = ScoringModel::new(
        settings.model.clone(),
        ModelRole::Pretrained,
        chars,
        bigrams,
        Vocab::with_specials(),
        heads,
        &mut init,
    )?;
    load_embeddings_into(&mut model, "emb.char", args.char_emb.as_deref())?;
    load_embeddings_into(&mut model, "emb.bichar", args.bichar_emb.as_deref())?;

    let records = pretrainer::multitask_pretrain(&mut model, &sources, &settings.pretrain)?;
    let lines: Vec<String> = records.iter().map(|r| r.to_line()).collect();
    for line in &lines {
        println!("{line}");
    }
    if let Some(log) = &args.log {
        write_lines(log, &lines)?;
    }

    let out = args.out.as_ref().expect("clap requires --out");
    modelio::save(&model, out, &settings.pretrain_pairs())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".log");
    PathBuf::from(os)
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut settings = resolve_settings(&args.settings)?;
    if let Some(beam) = args.beam {
        settings.train.beam = beam;
    }
    if let Some(epochs) = args.epochs {
        settings.train.epochs = epochs;
    }
    if let Some(seed) = args.seed {
        settings.train.seed = seed;
    }

    let pre = match &args.pretrained {
        Some(path) => Some(modelio::load(path)?.0),
        None => None,
    };
    if let Some(pm) = &pre {
        if settings.adopt_stack(&pm.cfg) && !args.settings.print_config {
            println!(
                "adopted the pretrained window stack (char_dim={}, bichar_dim={}, xc_dim={}, mlp_layers={})",
                pm.cfg.char_dim, pm.cfg.bichar_dim, pm.cfg.xc_dim, pm.cfg.mlp_layers
            );
        }
    }
    if args.settings.print_config {
        print!("{}", settings.render());
        return Ok(());
    }

    let train_set = corpusio::read_segmented(args.train.as_ref().expect("clap requires --train"))?;
    let dev_set = corpusio::read_segmented(args.dev.as_ref().expect("clap requires --dev"))?;

    let (chars, bigrams, words) = match &pre {
        Some(pm) => {
            // Adopt the pretrained vocabularies verbatim so embedding rows
            // keep their meaning, then recount singletons on this corpus.
            let mut chars = pm.chars.clone();
            let mut bigrams = pm.bigrams.clone();
            corpusio::recount_vocabs(&mut chars, &mut bigrams, &train_set);
            let (_, _, words) = corpusio::build_vocabs(&train_set);
            (chars, bigrams, words)
        }
        None => corpusio::build_vocabs(&train_set),
    };

    let mut init = ChaCha8Rng::seed_from_u64(settings.train.seed);
    let mut model = ScoringModel::new(
        settings.model.clone(),
        ModelRole::Segmentor,
        chars,
        bigrams,
        words,
        Vec::new(),
        &mut init,
    )?;
    load_embeddings_into(&mut model, "emb.char", args.char_emb.as_deref())?;
    load_embeddings_into(&mut model, "emb.bichar", args.bichar_emb.as_deref())?;
    load_embeddings_into(&mut model, "emb.word", args.word_emb.as_deref())?;
    if let Some(pm) = &pre {
        pretrainer::transfer(pm, &mut model)?;
        println!("transferred pretrained embeddings and window network");
    }

    let records = trainer::train(&mut model, &train_set, &dev_set, &settings.train)?;
    let lines: Vec<String> = records.iter().map(|r| r.to_line()).collect();
    for line in &lines {
        println!("{line}");
    }

    let out = args.out.as_ref().expect("clap requires --out");
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(out));
    write_lines(&log_path, &lines)?;
    modelio::save(&model, out, &settings.train_pairs())?;
    println!("wrote {} and {}", out.display(), log_path.display());
    Ok(())
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    if args.beam == 0 {
        return Err(Error::Usage("--beam must be at least 1".into()));
    }
    if args.threads == 0 {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    let (model, _) = modelio::load(&args.model)?;
    if model.role != ModelRole::Segmentor {
        return Err(Error::Usage(
            "the model file holds a pretrained network, not a segmentor".into(),
        ));
    }

    let text = match &args.input {
        Some(path) => std::fs::read_to_string(path)?,
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let sentences: Vec<Vec<char>> = text
        .lines()
        .map(|l| l.chars().filter(|c| !c.is_whitespace()).collect())
        .collect();

    let lines = segment_all(&model, &sentences, args.beam, args.threads)?;
    match &args.output {
        Some(path) => write_lines(path, &lines)?,
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            for line in &lines {
                writeln!(handle, "{line}")?;
            }
        }
    }
    Ok(())
}

/// Decodes sentences across worker threads. Input order is preserved
/// because each worker owns a fixed contiguous slice of the output.
fn segment_all(
    model: &ScoringModel,
    sentences: &[Vec<char>],
    beam: usize,
    threads: usize,
) -> Result<Vec<String>> {
    let render = |chars: &Vec<char>| -> Result<String> {
        if chars.is_empty() {
            return Ok(String::new());
        }
        let spans = decoder::segment_sentence(model, chars, beam)?;
        let words: Vec<String> = spans
            .iter()
            .map(|&(a, b)| chars[a..b].iter().collect())
            .collect();
        Ok(words.join(" "))
    };

    if threads <= 1 || sentences.len() <= 1 {
        return sentences.iter().map(render).collect();
    }

    let chunk = sentences.len().div_ceil(threads);
    let mut results: Vec<Result<String>> = (0..sentences.len()).map(|_| Ok(String::new())).collect();
    std::thread::scope(|scope| {
        let render = &render;
        for (out_slice, batch) in results.chunks_mut(chunk).zip(sentences.chunks(chunk)) {
            scope.spawn(move || {
                for (dst, src) in out_slice.iter_mut().zip(batch) {
                    *dst = render(src);
                }
            });
        }
    });
    results.into_iter().collect()
}

fn render_eval(r: &EvalResult) -> String {
    format!(
        "precision={:.4}\nrecall={:.4}\nf1={:.4}\ngold={} pred={} correct={}\n",
        r.precision, r.recall, r.f1, r.gold_count, r.pred_count, r.correct_count
    )
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let gold = corpusio::read_segmented(&args.gold)?;
    let pred = corpusio::read_segmented(&args.pred)?;
    let overall = corpusio::evaluate(&gold, &pred)?;
    print!("{}", render_eval(&overall));
    if args.per_length_bucket {
        for (label, r) in corpusio::evaluate_by_length(&gold, &pred)? {
            println!(
                "len {label}: f1={:.4} gold={} pred={} correct={}",
                r.f1, r.gold_count, r.pred_count, r.correct_count
            );
        }
    }
    Ok(())
}
