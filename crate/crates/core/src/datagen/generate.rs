//! Pair generators for the entity-change, role-swap and control corpora.

use rand::seq::SliceRandom;
use rand::Rng;

use super::lexicon::{Lexicons, Split};
use super::template::{SlotType, Template, TemplateKind};
use super::{numwords, GenConfig, SwapPair};
use crate::corpus::{source, Label, NliExample};
use crate::error::{Error, Result};
use crate::ner::Gazetteer;
use crate::text::tokenize;

fn pick<'a, T, R: Rng>(rng: &mut R, items: &'a [T], what: &str) -> Result<&'a T> {
    items.choose(rng).ok_or_else(|| Error::Input(format!("empty lexicon for {what}")))
}

/// Picks `k` distinct entries (by position) not equal to anything in `exclude`.
fn pick_distinct<R: Rng>(rng: &mut R, pool: &[String], exclude: &[&str], k: usize, what: &str) -> Result<Vec<String>> {
    let candidates: Vec<&String> = pool.iter().filter(|p| !exclude.contains(&p.as_str())).collect();
    if candidates.len() < k {
        return Err(Error::Input(format!("need {k} distinct {what} entries, lexicon has {}", candidates.len())));
    }
    Ok(candidates.choose_multiple(rng, k).map(|s| (*s).clone()).collect())
}

fn single(value: &str) -> Vec<String> {
    tokenize(value)
}

/// Allocates `total` across weights by largest remainder; ties go to the
/// earlier entry.
pub(crate) fn allocate(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if total == 0 || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut left = total - counts.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn of_kind(templates: &[Template], kind: TemplateKind) -> Vec<&Template> {
    templates.iter().filter(|t| t.kind == kind).collect()
}

/// Entity-change pairs for one split.
///
/// Names and locations swapped for different ones give neutral pairs;
/// changed quantities and dates, including a quantity rewritten as a
/// different number in words, give contradictions; an untouched copy gives
/// entailment.
pub fn gen_ner_changed<R: Rng>(
    templates: &[Template],
    lex: &Lexicons,
    split: Split,
    count: usize,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Vec<NliExample>> {
    let mix = &cfg.ner_mix;
    let kinds = [
        (TemplateKind::NerSingle, mix.single),
        (TemplateKind::NerDouble, mix.double),
        (TemplateKind::NerLocation, mix.location),
        (TemplateKind::NerNumber, mix.number),
        (TemplateKind::NerDate, mix.date),
    ];
    let counts = allocate(count, &kinds.map(|k| k.1));
    let names = lex.gender_neutral_names.get(split);
    let cities = lex.cities_countries.get(split);
    let numbers = lex.numbers(split);
    let dates = lex.dates.get(split);

    let mut out = Vec::with_capacity(count);
    for ((kind, _), n) in kinds.into_iter().zip(counts) {
        if n == 0 {
            continue;
        }
        let pool = of_kind(templates, kind);
        if pool.is_empty() {
            return Err(Error::Input(format!("no {kind} templates in the {} split", split.as_str())));
        }
        for _ in 0..n {
            let t = *pool.choose(rng).expect("nonempty");
            let entail = rng.gen_bool(cfg.entailment_fraction);
            let ex = match kind {
                TemplateKind::NerSingle | TemplateKind::NerDouble => {
                    let slots = if kind == TemplateKind::NerSingle { 1 } else { 2 };
                    let orig = pick_distinct(rng, names, &[], slots, "name")?;
                    let mut changed = orig.clone();
                    if !entail {
                        let exclude: Vec<&str> = orig.iter().map(String::as_str).collect();
                        // which slots change: X, Y, or both
                        let which: &[usize] = if slots == 1 {
                            &[0]
                        } else {
                            [&[0usize][..], &[1], &[0, 1]][rng.gen_range(0..3)]
                        };
                        let fresh = pick_distinct(rng, names, &exclude, which.len(), "name")?;
                        for (&slot, name) in which.iter().zip(fresh) {
                            changed[slot] = name;
                        }
                    }
                    let fill = |vals: &[String]| {
                        t.fill(|s| match s {
                            SlotType::PersonY => single(&vals[1]),
                            _ => single(&vals[0]),
                        })
                        .tokens
                    };
                    let label = if entail { Label::Entailment } else { Label::Neutral };
                    NliExample::new(fill(&orig), fill(&changed), label, source::NER_NAME)?
                }
                TemplateKind::NerLocation => {
                    let orig = pick(rng, cities, "city")?.clone();
                    let hyp = if entail {
                        orig.clone()
                    } else {
                        pick_distinct(rng, cities, &[&orig], 1, "city")?.remove(0)
                    };
                    let label = if entail { Label::Entailment } else { Label::Neutral };
                    NliExample::new(
                        t.fill(|_| single(&orig)).tokens,
                        t.fill(|_| single(&hyp)).tokens,
                        label,
                        source::NER_LOCATION,
                    )?
                }
                TemplateKind::NerNumber => {
                    let orig = *pick(rng, &numbers, "number")?;
                    let premise = t.fill(|_| vec![orig.to_string()]).tokens;
                    let (hyp, label) = if entail {
                        (premise.clone(), Label::Entailment)
                    } else {
                        let others: Vec<u64> = numbers.iter().copied().filter(|&v| v != orig).collect();
                        let other = *pick(rng, &others, "a second number")?;
                        let in_words = rng.gen_bool(cfg.number_word_fraction);
                        let value = if in_words && other < numwords::LIMIT {
                            numwords::number_to_words(other)?.split(' ').map(str::to_string).collect()
                        } else {
                            vec![other.to_string()]
                        };
                        (t.fill(|_| value.clone()).tokens, Label::Contradiction)
                    };
                    NliExample::new(premise, hyp, label, source::NER_NUMBER)?
                }
                TemplateKind::NerDate => {
                    let orig = pick(rng, dates, "date")?.clone();
                    let (hyp, label) = if entail {
                        (orig.clone(), Label::Entailment)
                    } else {
                        (pick_distinct(rng, dates, &[&orig], 1, "date")?.remove(0), Label::Contradiction)
                    };
                    NliExample::new(
                        t.fill(|_| single(&orig)).tokens,
                        t.fill(|_| single(&hyp)).tokens,
                        label,
                        source::NER_DATE,
                    )?
                }
                TemplateKind::RoleSwap => unreachable!("not an entity-change kind"),
            };
            out.push(ex);
        }
    }
    Ok(out)
}

/// Role-swap pairs for one split: slot templates filled with two distinct
/// names and then swapped, plus span swaps of annotated sentences.
#[allow(clippy::too_many_arguments)]
pub fn gen_role_switched<R: Rng>(
    templates: &[Template],
    swap_pairs: &[SwapPair],
    lex: &Lexicons,
    gaz: &Gazetteer,
    split: Split,
    count: usize,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Vec<NliExample>> {
    let role: Vec<&Template> = templates.iter().filter(|t| t.kind == TemplateKind::RoleSwap).collect();
    if let Some(bad) = role.iter().find(|t| t.slots().count() < 2) {
        return Err(Error::Input(format!("role template {:?} has fewer than two slots", bad.text())));
    }
    let weights = if swap_pairs.is_empty() {
        [1.0, 0.0]
    } else if role.is_empty() {
        [0.0, 1.0]
    } else {
        [1.0 - cfg.qasrl_fraction, cfg.qasrl_fraction]
    };
    let counts = allocate(count, &weights);
    if counts[0] > 0 && role.is_empty() {
        return Err(Error::Input(format!("no role templates in the {} split", split.as_str())));
    }
    let names = lex.gender_neutral_names.get(split);

    let mut out = Vec::with_capacity(count);
    for _ in 0..counts[0] {
        let t = *role.choose(rng).expect("nonempty");
        let entail = rng.gen_bool(cfg.entailment_fraction);
        let pair = pick_distinct(rng, names, &[], 2, "name")?;
        let fill = |x: &str, y: &str| {
            t.fill(|s| match s {
                SlotType::PersonY => single(y),
                _ => single(x),
            })
            .tokens
        };
        let premise = fill(&pair[0], &pair[1]);
        let (hyp, label) = if entail {
            (premise.clone(), Label::Entailment)
        } else {
            (fill(&pair[1], &pair[0]), Label::Neutral)
        };
        out.push(NliExample::new(premise, hyp, label, source::ROLE_VN)?);
    }
    for _ in 0..counts[1] {
        let sp = swap_pairs.choose(rng).expect("nonempty");
        let entail = rng.gen_bool(cfg.entailment_fraction);
        let (hyp, label) = if entail {
            (sp.tokens.clone(), Label::Entailment)
        } else {
            (sp.swapped(gaz), Label::Neutral)
        };
        out.push(NliExample::new(sp.tokens.clone(), hyp, label, source::ROLE_QASRL)?);
    }
    Ok(out)
}

fn fill_random<R: Rng>(t: &Template, lex: &Lexicons, split: Split, rng: &mut R) -> Result<Vec<String>> {
    let names = pick_distinct(rng, lex.gender_neutral_names.get(split), &[], 2, "name")?;
    let city = pick(rng, lex.cities_countries.get(split), "city")?.clone();
    let number = pick(rng, &lex.numbers(split), "number")?.to_string();
    let date = pick(rng, lex.dates.get(split), "date")?.clone();
    Ok(t.fill(|s| match s {
        SlotType::PersonX => single(&names[0]),
        SlotType::PersonY => single(&names[1]),
        SlotType::City => single(&city),
        SlotType::Num => single(&number),
        SlotType::Date => single(&date),
    })
    .tokens)
}

/// Pairs without entity manipulation: an identical copy (entailment) or two
/// sentences from different templates (neutral).
pub fn gen_control<R: Rng>(
    templates: &[Template],
    lex: &Lexicons,
    split: Split,
    count: usize,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Vec<NliExample>> {
    if templates.len() < 2 {
        return Err(Error::Input(format!("control pairs need two templates in the {} split", split.as_str())));
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let entail = rng.gen_bool(cfg.entailment_fraction);
        let (i, j) = loop {
            let i = rng.gen_range(0..templates.len());
            let j = rng.gen_range(0..templates.len());
            if entail || templates[i].text() != templates[j].text() {
                break (i, j);
            }
        };
        let premise = fill_random(&templates[i], lex, split, rng)?;
        let (hyp, label) = if entail {
            (premise.clone(), Label::Entailment)
        } else {
            (fill_random(&templates[j], lex, split, rng)?, Label::Neutral)
        };
        out.push(NliExample::new(premise, hyp, label, source::CONTROL)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_is_exact_and_proportional() {
        assert_eq!(allocate(10, &[8.0, 1.0, 1.0]), vec![8, 1, 1]);
        assert_eq!(allocate(15, &[0.8, 0.1, 0.1]), vec![12, 2, 1]);
        assert_eq!(allocate(7, &[1.0, 0.0]), vec![7, 0]);
        assert_eq!(allocate(0, &[1.0, 2.0]), vec![0, 0]);
        let c = allocate(1001, &[0.55, 0.15, 0.12, 0.12, 0.06]);
        assert_eq!(c.iter().sum::<usize>(), 1001);
    }
}
