//! Brute-force rotations and shadow projection on plain integer triples.

pub type Matrix = [[i32; 3]; 3];

/// Every 3×3 signed permutation matrix with determinant +1, found by
/// checking all 3⁹ matrices with entries in {−1, 0, 1}.
pub fn all_rotations() -> Vec<Matrix> {
    let mut out = Vec::new();
    for code in 0..3usize.pow(9) {
        let mut m = [[0; 3]; 3];
        let mut c = code;
        for entry in m.iter_mut().flatten() {
            *entry = (c % 3) as i32 - 1;
            c /= 3;
        }
        let orthogonal = (0..3).all(|a| {
            (0..3).all(|b| {
                let dot: i32 = (0..3).map(|k| m[a][k] * m[b][k]).sum();
                dot == i32::from(a == b)
            })
        });
        if orthogonal && det(&m) == 1 {
            out.push(m);
        }
    }
    out
}

pub fn det(m: &Matrix) -> i32 {
    m[0][0] * m[1][1] * m[2][2] + m[0][1] * m[1][2] * m[2][0] + m[0][2] * m[1][0] * m[2][1]
        - m[0][2] * m[1][1] * m[2][0]
        - m[0][0] * m[1][2] * m[2][1]
        - m[0][1] * m[1][0] * m[2][2]
}

/// Shadow on the wall behind the object after rotating by `m`: each cell
/// lands at its rotated (x, y). Rows run from the largest y down; columns
/// from the smallest x. Cropped to the filled region.
pub fn project(cells: &[(i32, i32, i32)], m: &Matrix) -> Vec<String> {
    let wall: Vec<(i32, i32)> = cells
        .iter()
        .map(|&(x, y, z)| {
            let v = [x, y, z];
            let r = |row: [i32; 3]| row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
            (r(m[0]), r(m[1]))
        })
        .collect();
    let xs = wall.iter().map(|p| p.0);
    let ys = wall.iter().map(|p| p.1);
    let (x_lo, x_hi) = (xs.clone().min().unwrap(), xs.max().unwrap());
    let (y_lo, y_hi) = (ys.clone().min().unwrap(), ys.max().unwrap());
    let mut rows = Vec::new();
    for y in (y_lo..=y_hi).rev() {
        let mut row = String::new();
        for x in x_lo..=x_hi {
            row.push(if wall.contains(&(x, y)) { '1' } else { '0' });
        }
        rows.push(row);
    }
    rows
}
