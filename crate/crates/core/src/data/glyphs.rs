/// 7×7 bitmaps for `a`–`z`, one string per row, `#` = ink.
const GLYPHS: [[&str; 7]; 26] = [
    [".###...", "#...#..", "#...#..", "#####..", "#...#..", "#...#..", "#...#.."],
    ["####...", "#...#..", "#...#..", "####...", "#...#..", "#...#..", "####..."],
    [".####..", "#......", "#......", "#......", "#......", "#......", ".####.."],
    ["####...", "#...#..", "#....#.", "#....#.", "#....#.", "#...#..", "####..."],
    ["#####..", "#......", "#......", "####...", "#......", "#......", "#####.."],
    ["#####..", "#......", "#......", "####...", "#......", "#......", "#......"],
    [".####..", "#......", "#......", "#..###.", "#....#.", "#....#.", ".####.."],
    ["#....#.", "#....#.", "#....#.", "######.", "#....#.", "#....#.", "#....#."],
    ["#####..", "..#....", "..#....", "..#....", "..#....", "..#....", "#####.."],
    ["..####.", "....#..", "....#..", "....#..", "#...#..", "#...#..", ".###..."],
    ["#...#..", "#..#...", "#.#....", "##.....", "#.#....", "#..#...", "#...#.."],
    ["#......", "#......", "#......", "#......", "#......", "#......", "######."],
    ["#.....#", "##...##", "#.#.#.#", "#..#..#", "#.....#", "#.....#", "#.....#"],
    ["#....#.", "##...#.", "#.#..#.", "#..#.#.", "#...##.", "#....#.", "#....#."],
    [".####..", "#....#.", "#....#.", "#....#.", "#....#.", "#....#.", ".####.."],
    ["#####..", "#....#.", "#....#.", "#####..", "#......", "#......", "#......"],
    [".####..", "#....#.", "#....#.", "#....#.", "#..#.#.", "#...#..", ".###.#."],
    ["#####..", "#....#.", "#....#.", "#####..", "#..#...", "#...#..", "#....#."],
    [".#####.", "#......", "#......", ".####..", ".....#.", ".....#.", "#####.."],
    ["#######", "...#...", "...#...", "...#...", "...#...", "...#...", "...#..."],
    ["#....#.", "#....#.", "#....#.", "#....#.", "#....#.", "#....#.", ".####.."],
    ["#.....#", "#.....#", ".#...#.", ".#...#.", "..#.#..", "..#.#..", "...#..."],
    ["#.....#", "#.....#", "#.....#", "#..#..#", "#.#.#.#", "##...##", "#.....#"],
    ["#.....#", ".#...#.", "..#.#..", "...#...", "..#.#..", ".#...#.", "#.....#"],
    ["#.....#", ".#...#.", "..#.#..", "...#...", "...#...", "...#...", "...#..."],
    ["#######", ".....#.", "....#..", "...#...", "..#....", ".#.....", "#######"],
];

pub const GLYPH_SIZE: usize = 7;

/// Row-major 7×7 ink mask of a lowercase letter.
pub fn glyph(c: char) -> Option<[[bool; GLYPH_SIZE]; GLYPH_SIZE]> {
    if !c.is_ascii_lowercase() {
        return None;
    }
    let rows = &GLYPHS[(c as u8 - b'a') as usize];
    let mut out = [[false; GLYPH_SIZE]; GLYPH_SIZE];
    for (r, row) in rows.iter().enumerate() {
        for (col, ch) in row.bytes().enumerate() {
            out[r][col] = ch == b'#';
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_letter_is_well_formed_and_distinct() {
        for rows in GLYPHS {
            assert!(rows.iter().all(|r| r.len() == GLYPH_SIZE && r.bytes().all(|b| b == b'#' || b == b'.')));
        }
        let all: Vec<_> = ('a'..='z').map(|c| glyph(c).unwrap()).collect();
        for i in 0..26 {
            for j in i + 1..26 {
                assert_ne!(all[i], all[j]);
            }
        }
        assert!(glyph('A').is_none() && glyph('1').is_none());
    }
}
