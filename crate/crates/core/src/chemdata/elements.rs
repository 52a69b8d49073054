//! Periodic table lookup for Z = 1..=86.

pub const MAX_Z: u32 = 86;

const SYMBOLS: [&str; 86] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn",
];

/// Atomic number for a symbol, ignoring case (`"cl"`, `"CL"` and `"Cl"` all map to 17).
pub fn atomic_number(symbol: &str) -> Option<u32> {
    let symbol = symbol.trim();
    SYMBOLS
        .iter()
        .position(|s| s.eq_ignore_ascii_case(symbol))
        .map(|i| i as u32 + 1)
}

pub fn symbol(z: u32) -> Option<&'static str> {
    if z == 0 || z > MAX_Z {
        return None;
    }
    Some(SYMBOLS[z as usize - 1])
}

/// Parses either an element symbol or a bare atomic number.
pub fn parse_element(token: &str) -> Option<u32> {
    match token.parse::<u32>() {
        Ok(z) if (1..=MAX_Z).contains(&z) => Some(z),
        Ok(_) => None,
        Err(_) => atomic_number(token),
    }
}

/// Parses a comma separated list such as `"As,Se,Br,Te,I"`.
pub fn parse_element_list(list: &str) -> Result<Vec<u32>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_element(s).ok_or_else(|| format!("unknown element '{s}'")))
        .collect()
}
