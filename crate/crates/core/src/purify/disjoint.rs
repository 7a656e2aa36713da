//! Searches over internal-node bitmasks of flooding routes. Two routes are
//! internally disjoint iff their masks do not intersect.

/// Whether `pool` holds `need` pairwise-disjoint masks that also avoid `used`.
pub fn has_disjoint(pool: &[u16], need: usize, used: u16) -> bool {
    if need == 0 {
        return true;
    }
    let cands: Vec<u16> = pool.iter().copied().filter(|&m| m & used == 0).collect();
    extend(&cands, need, used)
}

fn extend(cands: &[u16], need: usize, used: u16) -> bool {
    if need == 0 {
        return true;
    }
    if cands.len() < need {
        return false;
    }
    for (i, &m) in cands.iter().enumerate() {
        if cands.len() - i < need {
            break;
        }
        let used2 = used | m;
        let rest: Vec<u16> = cands[i + 1..].iter().copied().filter(|&c| c & used2 == 0).collect();
        if extend(&rest, need - 1, used2) {
            return true;
        }
    }
    false
}

/// Size of the largest pairwise-disjoint subfamily (exact, exponential).
pub fn max_disjoint_family(masks: &[u16]) -> usize {
    let mut best = 0;
    grow(masks, 0, 0, &mut best);
    best
}

fn grow(cands: &[u16], used: u16, size: usize, best: &mut usize) {
    if size + cands.len() <= *best {
        return;
    }
    match cands.split_first() {
        None => *best = size,
        Some((&m, rest)) => {
            let keep: Vec<u16> = rest.iter().copied().filter(|&c| c & (used | m) == 0).collect();
            grow(&keep, used | m, size + 1, best);
            grow(rest, used, size, best);
        }
    }
}

/// First-fit in arrival order; never overcounts.
pub fn greedy_family(masks: &[u16]) -> usize {
    let mut used = 0u16;
    let mut count = 0;
    for &m in masks {
        if m & used == 0 {
            used |= m;
            count += 1;
        }
    }
    count
}
