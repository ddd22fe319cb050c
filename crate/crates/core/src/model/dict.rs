//! Small static lookup tables standing in for the full country, university,
//! name and tag dictionaries.

use super::entity::{CountryId, TagId, UniversityId};

pub struct CountryInfo {
    pub name: &'static str,
    /// Relative population weight; skews the person distribution.
    pub weight: u32,
    pub first_names: &'static [&'static str],
    pub last_names: &'static [&'static str],
    /// Tags over-represented among residents.
    pub favourite_tags: &'static [u64],
}

pub const COUNTRIES: &[CountryInfo] = &[
    CountryInfo {
        name: "India",
        weight: 30,
        first_names: &["Aarav", "Priya", "Rahul", "Ananya", "Vikram"],
        last_names: &["Sharma", "Patel", "Singh", "Kumar", "Iyer"],
        favourite_tags: &[0, 1, 2],
    },
    CountryInfo {
        name: "China",
        weight: 28,
        first_names: &["Wei", "Jing", "Lei", "Fang", "Hao"],
        last_names: &["Wang", "Li", "Zhang", "Liu", "Chen"],
        favourite_tags: &[3, 4, 5],
    },
    CountryInfo {
        name: "United_States",
        weight: 14,
        first_names: &["James", "Mary", "John", "Linda", "Ada"],
        last_names: &["Smith", "Johnson", "Brown", "Jones", "Miller"],
        favourite_tags: &[6, 7, 0],
    },
    CountryInfo {
        name: "Germany",
        weight: 8,
        first_names: &["Hans", "Anna", "Lukas", "Mia", "Jonas"],
        last_names: &["Muller", "Schmidt", "Schneider", "Fischer", "Weber"],
        favourite_tags: &[8, 9, 6],
    },
    CountryInfo {
        name: "France",
        weight: 7,
        first_names: &["Jean", "Marie", "Pierre", "Camille", "Louis"],
        last_names: &["Martin", "Bernard", "Dubois", "Thomas", "Robert"],
        favourite_tags: &[10, 11, 8],
    },
    CountryInfo {
        name: "Brazil",
        weight: 7,
        first_names: &["Joao", "Ana", "Pedro", "Beatriz", "Lucas"],
        last_names: &["Silva", "Santos", "Oliveira", "Souza", "Costa"],
        favourite_tags: &[12, 13, 7],
    },
    CountryInfo {
        name: "Japan",
        weight: 6,
        first_names: &["Haruto", "Yui", "Sota", "Hina", "Ren"],
        last_names: &["Sato", "Suzuki", "Takahashi", "Tanaka", "Ito"],
        favourite_tags: &[14, 15, 4],
    },
    CountryInfo {
        name: "Nigeria",
        weight: 5,
        first_names: &["Chinedu", "Ngozi", "Emeka", "Amaka", "Tunde"],
        last_names: &["Okafor", "Adeyemi", "Okonkwo", "Balogun", "Eze"],
        favourite_tags: &[16, 12, 1],
    },
    CountryInfo {
        name: "Mexico",
        weight: 4,
        first_names: &["Diego", "Sofia", "Carlos", "Valeria", "Mateo"],
        last_names: &["Hernandez", "Garcia", "Lopez", "Martinez", "Gonzalez"],
        favourite_tags: &[13, 17, 10],
    },
    CountryInfo {
        name: "Italy",
        weight: 3,
        first_names: &["Marco", "Giulia", "Luca", "Chiara", "Matteo"],
        last_names: &["Rossi", "Russo", "Ferrari", "Esposito", "Bianchi"],
        favourite_tags: &[11, 18, 9],
    },
    CountryInfo {
        name: "Vietnam",
        weight: 2,
        first_names: &["Minh", "Lan", "Tuan", "Mai", "Duc"],
        last_names: &["Nguyen", "Tran", "Le", "Pham", "Hoang"],
        favourite_tags: &[19, 5, 15],
    },
    CountryInfo {
        name: "Iceland",
        weight: 1,
        first_names: &["Gunnar", "Sigrun", "Olafur", "Helga", "Bjorn"],
        last_names: &[
            "Jonsson",
            "Sigurdsson",
            "Gudmundsson",
            "Olafsdottir",
            "Magnusson",
        ],
        favourite_tags: &[9, 18, 19],
    },
];

pub const TAG_NAMES: &[&str] = &[
    "Cricket",
    "Bollywood",
    "Yoga",
    "Go_(game)",
    "Table_tennis",
    "Tea",
    "Baseball",
    "Jazz",
    "Beer",
    "Techno",
    "Cinema",
    "Opera",
    "Football",
    "Samba",
    "Anime",
    "Sushi",
    "Afrobeat",
    "Lucha_libre",
    "Cycling",
    "Chess",
];

pub const UNIVERSITIES_PER_COUNTRY: u64 = 3;

pub fn country_count() -> usize {
    COUNTRIES.len()
}

pub fn tag_count() -> usize {
    TAG_NAMES.len()
}

pub fn country(id: CountryId) -> Option<&'static CountryInfo> {
    COUNTRIES.get(id.0 as usize)
}

pub fn universities_of(country: CountryId) -> impl Iterator<Item = UniversityId> {
    let base = country.0 * UNIVERSITIES_PER_COUNTRY;
    (base..base + UNIVERSITIES_PER_COUNTRY).map(UniversityId)
}

pub fn university_country(u: UniversityId) -> CountryId {
    CountryId(u.0 / UNIVERSITIES_PER_COUNTRY)
}

pub fn favourite_tags(country: CountryId) -> impl Iterator<Item = TagId> {
    COUNTRIES
        .get(country.0 as usize)
        .map(|c| c.favourite_tags)
        .unwrap_or(&[])
        .iter()
        .map(|&t| TagId(t))
}
