/// Lowercases `text`, splits on every non-alphanumeric character and drops
/// tokens shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .collect()
}
