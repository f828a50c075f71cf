use std::fmt;

/// The thirteen supported elements, plus the attachment marker used for
/// fragment stubs. `Dummy` never comes out of the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Element {
    H,
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Se,
    Br,
    I,
    Dummy,
}

impl Element {
    pub const ALL: [Element; 13] = [
        Element::H,
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Se,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Se => "Se",
            Element::Br => "Br",
            Element::I => "I",
            Element::Dummy => "*",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == s)
    }

    /// Lowercase aromatic spelling, for elements allowed to be aromatic.
    pub fn aromatic_symbol(self) -> Option<&'static str> {
        match self {
            Element::B => Some("b"),
            Element::C => Some("c"),
            Element::N => Some("n"),
            Element::O => Some("o"),
            Element::P => Some("p"),
            Element::S => Some("s"),
            Element::Se => Some("se"),
            _ => None,
        }
    }

    pub fn from_aromatic_symbol(s: &str) -> Option<Element> {
        match s {
            "b" => Some(Element::B),
            "c" => Some(Element::C),
            "n" => Some(Element::N),
            "o" => Some(Element::O),
            "p" => Some(Element::P),
            "s" => Some(Element::S),
            "se" => Some(Element::Se),
            _ => None,
        }
    }

    pub fn can_be_aromatic(self) -> bool {
        self.aromatic_symbol().is_some()
    }

    /// Members of the SMILES organic subset, writable without brackets.
    pub fn is_organic_subset(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::F
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }

    /// Allowed valences for a neutral atom, ascending.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::H => &[1],
            Element::B => &[3],
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::F | Element::Cl | Element::Br | Element::I => &[1],
            Element::Si => &[4],
            Element::P => &[3, 5],
            Element::S | Element::Se => &[2, 4, 6],
            Element::Dummy => &[1],
        }
    }

    /// Standard atomic mass in daltons.
    pub fn mass(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::B => 10.81,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::F => 18.998,
            Element::Si => 28.085,
            Element::P => 30.974,
            Element::S => 32.06,
            Element::Cl => 35.45,
            Element::Se => 78.971,
            Element::Br => 79.904,
            Element::I => 126.904,
            Element::Dummy => 0.0,
        }
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Small integer code used inside invariants and hashes.
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}
