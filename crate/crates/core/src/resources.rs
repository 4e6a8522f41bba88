//! Word lists, templates and swap pairs bundled into the library.
//!
//! The same files live under `crates/core/data/` and can be pointed at from a
//! generation config; these copies make the defaults usable without a
//! checkout.

pub struct Builtin {
    pub gaz_names: &'static str,
    pub gaz_cities: &'static str,
    pub gaz_months: &'static str,
    pub gaz_numeric: &'static str,
    pub lex_names: &'static str,
    pub lex_cities: &'static str,
    pub lex_numbers: &'static str,
    pub lex_dates: &'static str,
    pub ner_templates: &'static str,
    pub role_templates: &'static str,
    pub swap_pairs: &'static str,
    pub story_sentences: &'static str,
}

pub fn builtin() -> Builtin {
    Builtin {
        gaz_names: include_str!("../data/gazetteer/names.txt"),
        gaz_cities: include_str!("../data/gazetteer/cities.txt"),
        gaz_months: include_str!("../data/gazetteer/months.txt"),
        gaz_numeric: include_str!("../data/gazetteer/numeric_words.txt"),
        lex_names: include_str!("../data/lexicon/names.txt"),
        lex_cities: include_str!("../data/lexicon/cities.txt"),
        lex_numbers: include_str!("../data/lexicon/numbers.txt"),
        lex_dates: include_str!("../data/lexicon/dates.txt"),
        ner_templates: include_str!("../data/templates/ner.tsv"),
        role_templates: include_str!("../data/templates/role.tsv"),
        swap_pairs: include_str!("../data/swap_pairs.jsonl"),
        story_sentences: include_str!("../data/babi_sentences.txt"),
    }
}
