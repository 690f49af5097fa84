//! Porter suffix-stripping stemmer, original 1980 rule set.

fn is_vowel_letter(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn is_consonant(w: &[char], mut i: usize) -> bool {
    if is_vowel_letter(w[i]) {
        return false;
    }
    // a 'y' flips the class of the letter before it
    let mut negate = false;
    while i > 0 && w[i] == 'y' {
        negate = !negate;
        i -= 1;
    }
    !is_vowel_letter(w[i]) != negate
}

/// Number of vowel-consonant transitions, Porter's `m`.
fn measure(w: &[char]) -> usize {
    (1..w.len())
        .filter(|&i| !is_consonant(w, i - 1) && is_consonant(w, i))
        .count()
}

fn contains_vowel(w: &[char]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

fn ends_double_consonant(w: &[char]) -> bool {
    let n = w.len();
    n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1)
}

fn ends_cvc(w: &[char]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], 'w' | 'x' | 'y')
}

fn ends_with(w: &[char], suffix: &str) -> bool {
    let s: Vec<char> = suffix.chars().collect();
    w.len() >= s.len() && w[w.len() - s.len()..] == s[..]
}

fn strip<'a>(w: &'a [char], suffix: &str) -> &'a [char] {
    &w[..w.len() - suffix.chars().count()]
}

fn join(stem: &[char], tail: &str) -> Vec<char> {
    stem.iter().copied().chain(tail.chars()).collect()
}

type Condition = fn(&[char]) -> bool;

/// Applies the first rule whose suffix matches. A matching rule whose
/// condition fails ends the step with the word unchanged.
fn apply_rules(w: Vec<char>, rules: &[(&str, &str, Condition)]) -> Vec<char> {
    for &(suffix, replacement, condition) in rules {
        if ends_with(&w, suffix) {
            let stem = strip(&w, suffix);
            return if condition(stem) { join(stem, replacement) } else { w };
        }
    }
    w
}

fn m_gt0(s: &[char]) -> bool {
    measure(s) > 0
}

fn m_gt1(s: &[char]) -> bool {
    measure(s) > 1
}

fn always(_: &[char]) -> bool {
    true
}

fn step1a(w: Vec<char>) -> Vec<char> {
    apply_rules(
        w,
        &[
            ("sses", "ss", always),
            ("ies", "i", always),
            ("ss", "ss", always),
            ("s", "", always),
        ],
    )
}

fn step1b(w: Vec<char>) -> Vec<char> {
    if ends_with(&w, "eed") {
        let stem = strip(&w, "eed");
        return if measure(stem) > 0 { join(stem, "ee") } else { w };
    }
    let stem = ["ed", "ing"]
        .into_iter()
        .find(|s| ends_with(&w, s) && contains_vowel(strip(&w, s)))
        .map(|s| strip(&w, s).to_vec());
    let Some(stem) = stem else {
        return w;
    };
    for (suffix, replacement) in [("at", "ate"), ("bl", "ble"), ("iz", "ize")] {
        if ends_with(&stem, suffix) {
            return join(strip(&stem, suffix), replacement);
        }
    }
    if ends_double_consonant(&stem) {
        let last = stem[stem.len() - 1];
        return if matches!(last, 'l' | 's' | 'z') {
            stem
        } else {
            stem[..stem.len() - 1].to_vec()
        };
    }
    if measure(&stem) == 1 && ends_cvc(&stem) {
        return join(&stem, "e");
    }
    stem
}

fn step1c(w: Vec<char>) -> Vec<char> {
    apply_rules(w, &[("y", "i", contains_vowel)])
}

fn step2(w: Vec<char>) -> Vec<char> {
    apply_rules(
        w,
        &[
            ("ational", "ate", m_gt0),
            ("tional", "tion", m_gt0),
            ("enci", "ence", m_gt0),
            ("anci", "ance", m_gt0),
            ("izer", "ize", m_gt0),
            ("abli", "able", m_gt0),
            ("alli", "al", m_gt0),
            ("entli", "ent", m_gt0),
            ("eli", "e", m_gt0),
            ("ousli", "ous", m_gt0),
            ("ization", "ize", m_gt0),
            ("ation", "ate", m_gt0),
            ("ator", "ate", m_gt0),
            ("alism", "al", m_gt0),
            ("iveness", "ive", m_gt0),
            ("fulness", "ful", m_gt0),
            ("ousness", "ous", m_gt0),
            ("aliti", "al", m_gt0),
            ("iviti", "ive", m_gt0),
            ("biliti", "ble", m_gt0),
        ],
    )
}

fn step3(w: Vec<char>) -> Vec<char> {
    apply_rules(
        w,
        &[
            ("icate", "ic", m_gt0),
            ("ative", "", m_gt0),
            ("alize", "al", m_gt0),
            ("iciti", "ic", m_gt0),
            ("ical", "ic", m_gt0),
            ("ful", "", m_gt0),
            ("ness", "", m_gt0),
        ],
    )
}

fn ion_condition(s: &[char]) -> bool {
    measure(s) > 1 && matches!(s.last(), Some('s' | 't'))
}

fn step4(w: Vec<char>) -> Vec<char> {
    apply_rules(
        w,
        &[
            ("al", "", m_gt1),
            ("ance", "", m_gt1),
            ("ence", "", m_gt1),
            ("er", "", m_gt1),
            ("ic", "", m_gt1),
            ("able", "", m_gt1),
            ("ible", "", m_gt1),
            ("ant", "", m_gt1),
            ("ement", "", m_gt1),
            ("ment", "", m_gt1),
            ("ent", "", m_gt1),
            ("ion", "", ion_condition),
            ("ou", "", m_gt1),
            ("ism", "", m_gt1),
            ("ate", "", m_gt1),
            ("iti", "", m_gt1),
            ("ous", "", m_gt1),
            ("ive", "", m_gt1),
            ("ize", "", m_gt1),
        ],
    )
}

fn step5a(w: Vec<char>) -> Vec<char> {
    if ends_with(&w, "e") {
        let stem = strip(&w, "e");
        let m = measure(stem);
        if m > 1 || (m == 1 && !ends_cvc(stem)) {
            return stem.to_vec();
        }
    }
    w
}

fn step5b(w: Vec<char>) -> Vec<char> {
    if ends_with(&w, "ll") && measure(&w[..w.len() - 1]) > 1 {
        return w[..w.len() - 1].to_vec();
    }
    w
}

/// Stems a single word. Input is lowercased first.
pub fn stem(token: &str) -> String {
    let w: Vec<char> = token.to_lowercase().chars().collect();
    let w = step5b(step5a(step4(step3(step2(step1c(step1b(step1a(w))))))));
    w.into_iter().collect()
}

/// Lowercases and drops every non-alphanumeric character, so that
/// "state-of-the-art" and "F-score" line up with their lexicon forms.
pub fn normalize_token(token: &str) -> String {
    token
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from an independent Porter implementation (original rule set).
    const REFERENCE: &[(&str, &str)] = &[
        ("baselines", "baselin"),
        ("baseline", "baselin"),
        ("evaluation", "evalu"),
        ("evaluated", "evalu"),
        ("comparison", "comparison"),
        ("compared", "compar"),
        ("comparing", "compar"),
        ("gold", "gold"),
        ("outperforms", "outperform"),
        ("significantly", "significantli"),
        ("significant", "signific"),
        ("previous", "previou"),
        ("accuracy", "accuraci"),
        ("experiments", "experi"),
        ("precision", "precis"),
        ("overall", "overal"),
        ("scores", "score"),
        ("fscore", "fscore"),
        ("stateoftheart", "stateoftheart"),
        ("original", "origin"),
        ("modified", "modifi"),
        ("strategy", "strategi"),
        ("according", "accord"),
        ("performance", "perform"),
        ("correlation", "correl"),
        ("recall", "recal"),
        ("calculated", "calcul"),
        ("achieved", "achiev"),
        ("figure", "figur"),
        ("procedure", "procedur"),
        ("increased", "increas"),
        ("corpus", "corpu"),
        ("caresses", "caress"),
        ("ponies", "poni"),
        ("generalization", "gener"),
    ];

    #[test]
    fn matches_reference_stems() {
        for (word, expected) in REFERENCE {
            assert_eq!(stem(word), *expected, "stem({word})");
        }
    }

    #[test]
    fn normalization_strips_punctuation() {
        assert_eq!(normalize_token("State-of-the-Art"), "stateoftheart");
        assert_eq!(normalize_token("F-score,"), "fscore");
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(stem(""), "");
        assert_eq!(stem("y"), "y");
        assert_eq!(stem("yyyyyy"), stem("yyyyyy"));
        assert_eq!(stem("s"), "");
    }
}
