use std::collections::HashMap;

/// Dictionary keyed by token sequences, scanned leftmost-longest.
#[derive(Debug, Clone)]
pub struct AliasIndex<T> {
    entries: HashMap<Vec<String>, T>,
    max_len: usize,
}

impl<T> Default for AliasIndex<T> {
    fn default() -> Self {
        Self {
            entries: HashMap::new(),
            max_len: 0,
        }
    }
}

impl<T> AliasIndex<T> {
    pub fn get(&self, key: &[String]) -> Option<&T> {
        self.entries.get(key)
    }

    pub fn get_or_insert_with(&mut self, key: Vec<String>, f: impl FnOnce() -> T) -> &mut T {
        debug_assert!(!key.is_empty());
        self.max_len = self.max_len.max(key.len());
        self.entries.entry(key).or_insert_with(f)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<String>, &T)> {
        self.entries.iter()
    }

    /// Greedy scan: at each position take the longest key starting there,
    /// then jump past it. Returns `(start, end_exclusive, value)` in order.
    pub fn leftmost_longest<'a>(&'a self, tokens: &[String]) -> Vec<(usize, usize, &'a T)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let longest = self.max_len.min(tokens.len() - i);
            let hit = (1..=longest)
                .rev()
                .find_map(|len| self.entries.get(&tokens[i..i + len]).map(|v| (len, v)));
            match hit {
                Some((len, value)) => {
                    out.push((i, i + len, value));
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}
