use std::collections::HashMap;

/// Tags keep encodings of different constructors disjoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub(crate) enum Tag {
    Zero = 0,
    Phi,
    Row,
    Wl,
    Pos,
    Base,
    Delta,
    RevRow,
    Rev,
    MsgRow,
    Msg,
    Upd,
}

/// Injective table from canonical encodings to dense ids.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    ids: HashMap<Vec<u64>, u64>,
    keys: Vec<Vec<u64>>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn intern(&mut self, key: &[u64]) -> u64 {
        if let Some(&id) = self.ids.get(key) {
            return id;
        }
        let id = self.keys.len() as u64;
        self.ids.insert(key.to_vec(), id);
        self.keys.push(key.to_vec());
        id
    }

    /// Encoding behind an id.
    pub fn resolve(&self, id: u64) -> Option<&[u64]> {
        self.keys.get(id as usize).map(Vec::as_slice)
    }

    /// Reverse-table audit: every id maps back to a distinct key that maps to it.
    pub fn audit(&self) -> bool {
        self.ids.len() == self.keys.len() && self.keys.iter().enumerate().all(|(i, k)| self.ids.get(k) == Some(&(i as u64)))
    }

    pub(crate) fn tagged(&mut self, tag: Tag, parts: &[u64]) -> u64 {
        let mut key = Vec::with_capacity(parts.len() + 1);
        key.push(tag as u64);
        key.extend_from_slice(parts);
        self.intern(&key)
    }

    /// `tag ‖ head ‖ len ‖ sorted(items)`: a canonical multiset encoding.
    pub(crate) fn multiset(&mut self, tag: Tag, head: &[u64], mut items: Vec<u64>) -> u64 {
        items.sort_unstable();
        let mut key = Vec::with_capacity(head.len() + items.len() + 2);
        key.push(tag as u64);
        key.extend_from_slice(head);
        key.push(items.len() as u64);
        key.extend(items);
        self.intern(&key)
    }

    pub(crate) fn zero(&mut self) -> u64 {
        self.tagged(Tag::Zero, &[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_keys_equal_ids() {
        let mut i = Interner::new();
        let a = i.intern(&[1, 2, 3]);
        assert_eq!(i.intern(&[1, 2, 3]), a);
        assert_ne!(i.intern(&[1, 2]), a);
        assert_eq!(i.resolve(a), Some(&[1, 2, 3][..]));
        assert!(i.audit());
    }

    #[test]
    fn multisets_ignore_order_but_not_multiplicity() {
        let mut i = Interner::new();
        let a = i.multiset(Tag::Wl, &[7], vec![3, 1, 2]);
        assert_eq!(i.multiset(Tag::Wl, &[7], vec![2, 3, 1]), a);
        assert_ne!(i.multiset(Tag::Wl, &[7], vec![2, 3, 1, 1]), a);
        // The length prefix separates head from items.
        assert_ne!(i.multiset(Tag::Wl, &[], vec![7, 1, 2, 3]), a);
    }
}
