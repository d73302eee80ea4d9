//! Permutations of `{1..n}` as one-line arrays, in lexicographic order.

/// All permutations of `1..=n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<u8>> {
    let mut current: Vec<u8> = (1..=n as u8).collect();
    let mut out = vec![current.clone()];
    while next_permutation(&mut current) {
        out.push(current.clone());
    }
    out
}

pub fn next_permutation(p: &mut [u8]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("a larger element exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Lexicographic rank of a permutation of `1..=n`.
pub fn rank(p: &[u8]) -> usize {
    let n = p.len();
    let mut r = 0;
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&v| v < p[i]).count();
        r = r * (n - i) + smaller;
    }
    r
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// `tau o x` for the transposition `tau = (a b)` of values.
pub fn swap_values(x: &[u8], a: u8, b: u8) -> Vec<u8> {
    x.iter().map(|&v| if v == a { b } else if v == b { a } else { v }).collect()
}
