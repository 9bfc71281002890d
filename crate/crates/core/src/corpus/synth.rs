//! Deterministic synthetic-corpus generator.
//!
//! The real psychiatric-evaluation corpus is access-restricted, so this
//! module fabricates records from sentence templates with PHI slots. Slot
//! fillers come from small bundled pools plus format generators for
//! DATE / PHONE / ZIP / EMAIL / AGE and friends. A configurable fraction of
//! sentences use "glued" templates that reproduce the tokenizer pathologies
//! ("09/14/2067CPT", "a26 yo", "WhalenChief", …), and several templates
//! carry the "Dr. Vincent" mid-sentence abbreviation. Gold spans are
//! recorded exactly as the fillers are inserted, and generation is a pure
//! function of the config (per-document derived RNG streams).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{Document, PhiSpan, Subcategory};
use crate::errors::{DeidError, Result};
use crate::mix_seed;

/// Identifier of the bundled template set.
pub const DEFAULT_TEMPLATE_SET: &str = "clinical-v1";

/// Generator configuration. The seed fully determines the output.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    /// Per-subcategory frequency weights; zero removes a subcategory.
    pub weights: Vec<(Subcategory, f64)>,
    pub template_set: String,
    /// Fraction of PHI sentences drawn from glued-token templates.
    pub glue_rate: f64,
}

impl SynthConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        SynthConfig {
            count,
            seed,
            weights: default_weights(),
            template_set: DEFAULT_TEMPLATE_SET.to_string(),
            glue_rate: 0.15,
        }
    }
}

/// Default per-subcategory weights: common categories dominate, every
/// subcategory stays above zero.
pub fn default_weights() -> Vec<(Subcategory, f64)> {
    use Subcategory::*;
    vec![
        (Patient, 6.0),
        (Doctor, 7.0),
        (Username, 1.0),
        (Profession, 4.0),
        (Hospital, 4.0),
        (Organization, 4.0),
        (Street, 2.0),
        (City, 5.0),
        (State, 4.0),
        (Country, 3.0),
        (Zip, 2.0),
        (LocationOther, 1.5),
        (Age, 6.0),
        (Date, 8.0),
        (Phone, 3.0),
        (Fax, 1.0),
        (Email, 1.5),
        (Url, 1.0),
        (MedicalRecord, 1.5),
        (HealthPlan, 1.0),
        (License, 1.5),
        (IdNum, 1.5),
    ]
}

struct TemplateDef {
    text: &'static str,
    glue: bool,
}

const T: fn(&'static str) -> TemplateDef = |text| TemplateDef { text, glue: false };
const G: fn(&'static str) -> TemplateDef = |text| TemplateDef { text, glue: true };

fn template_defs() -> Vec<TemplateDef> {
    vec![
        T("Patient {PATIENT} was admitted on {DATE}."),
        T("Ms. {PATIENT} reports feeling better today."),
        T("Patient {PATIENT} lives in {CITY}, {STATE} {ZIP}."),
        T("{PATIENT} is a {AGE} year old {PROFESSION}."),
        T("Dr. {DOCTOR} reviewed the medication list."),
        T("Seen by Dr. {DOCTOR} at {HOSPITAL} on {DATE}."),
        T("Dr. {DOCTOR} signed the discharge note."),
        T("Username {USERNAME} entered the order."),
        T("Works as a {PROFESSION} at {ORGANIZATION}."),
        T("Retired {PROFESSION} formerly with {ORGANIZATION}."),
        T("Transferred from {HOSPITAL} overnight."),
        T("Address on file is {STREET}, {CITY}, {STATE}."),
        T("Family moved from {COUNTRY} to {CITY} in {DATE}."),
        T("Visited {LOCATION-OTHER} with family on {DATE}."),
        T("Walks daily near {LOCATION-OTHER}."),
        T("The patient is {AGE} years old."),
        T("Follow up scheduled for {DATE}."),
        T("Next appointment on {DATE} at {HOSPITAL}."),
        T("Call {PHONE} with any questions."),
        T("Fax results to {FAX} promptly."),
        T("Contact via {EMAIL} was preferred."),
        T("Results posted at {URL} for review."),
        T("MRN {MEDICALRECORD} was verified."),
        T("Health plan {HEALTHPLAN} covers the visit."),
        T("License {LICENSE} is on record."),
        T("Case number {IDNUM} was filed."),
        T("A {AGE} yo patient arrived from {CITY}."),
        T("Raised in {CITY} before moving to {STATE}."),
        T("Previously hospitalized at {HOSPITAL} in {DATE}."),
        T("Employer listed as {ORGANIZATION} in {CITY}."),
        T("Born in {COUNTRY}, now settled in {STATE}."),
        // Glued-token pathologies, one per tokenizer pattern family.
        G("a{AGE} yo man presented with back pain."),
        G("Records from {DATE}CPT coding were attached."),
        G("Reached at {PHONE}Prior authorization is pending."),
        G("Message sent to {EMAIL}Other attachments follow."),
        G("Discharged to {COUNTRY}Meaningful recovery expected."),
        G("{PATIENT}Chief complaint was headache."),
        G("Seen at {HOSPITAL}Before morning rounds."),
        G("Reviewed on {DATE}SOS flag was cleared."),
    ]
}

const FILLERS: &[&str] = &[
    "No acute distress was noted.",
    "Vitals remained stable overnight.",
    "Plan was discussed and agreed.",
    "Sleep and appetite were fair.",
    "Denies fever or chills.",
    "Medication adherence was reviewed.",
    "Mood and affect were congruent.",
    "Labs were within normal limits.",
];

const PATIENT_FIRST: &[&str] = &[
    "Alma", "Boyd", "Cara", "Dean", "Elsa", "Finn", "Gwen", "Hugo", "Iris", "Jonah", "Kiri",
    "Liam", "Mara", "Noel", "Opal", "Pria", "Quinn", "Rosa", "Seth", "Tova", "Vera", "Wade",
];
const PATIENT_LAST: &[&str] = &[
    "Abbott", "Briggs", "Calder", "Dalton", "Eames", "Farrow", "Gibson", "Harlow", "Irwin",
    "Jessup", "Kemp", "Larkin", "Mobley", "Nutter", "Ostrom", "Prewitt", "Quimby", "Ryder",
    "Sloan", "Tate", "Unger", "Voss",
];
const DOCTOR_LAST: &[&str] = &[
    "Vincent", "Whalen", "Rone", "Baxter", "Ellison", "Marsh", "Holt", "Reyes", "Chan", "Osei",
    "Navarro", "Brook", "Sutton", "Pike", "Mercer", "Lowell",
];
const PROFESSIONS: &[&str] = &[
    "teacher", "nurse", "construction worker", "landscape architect", "repair worker",
    "carpenter", "chef", "librarian", "electrician", "farmer", "clerk", "welder",
];
const HOSPITALS: &[&str] = &[
    "Mercy General Hospital", "Zenith Clinic", "Educare-Fargo", "Lakewood Medical Center",
    "Harborview Clinic", "Saint Anne Hospital", "Crestwood Infirmary", "Lister Memorial Hospital",
    "Lincoln Community Hospital", "Pinecrest Clinic", "Oakdale Hospital", "Summit Care Center",
];
const ORGANIZATIONS: &[&str] = &[
    "Albemarle Corporation", "State University of Wyoming", "Cancer Center of America",
    "Bob Evans Buildings", "HMC Home Services", "Baxter Industries", "Granite Trust",
    "Clearline Logistics", "Redwood Cooperative", "Northfield Society", "Telecom Guild",
    "Iron Bridge Works",
];
const LOCATION_OTHERS: &[&str] = &[
    "Lakeside Park", "Willow Trail", "Eastgate Plaza", "Foxhill Commons", "Riverwalk",
    "Stonegate Court", "Maplewood Green", "Cedar Point",
];
const CITIES: &[&str] = &[
    "Boston", "Denver", "Toledo", "Fargo", "Salem", "Dayton", "Norfolk", "Madison", "Juneau",
    "Phoenix", "Tucson", "Bangor", "Laredo", "Provo", "Reno", "Dover",
];
const STATES: &[&str] = &[
    "Wyoming", "Kansas", "Vermont", "Oregon", "Montana", "Idaho", "Maine", "Ohio", "Utah",
    "Nevada", "Alaska", "Iowa",
];
const COUNTRIES: &[&str] = &[
    "Canada", "Palau", "Brazil", "Norway", "Kenya", "Japan", "Chile", "Spain", "Egypt", "Peru",
    "USA", "Saint Vincent",
];
const STREET_NAMES: &[&str] = &[
    "Baker", "Mill", "Harbor", "Cedar", "Birch", "Summit", "Prospect", "Willow", "Granite",
    "Orchard",
];
const STREET_KINDS: &[&str] = &["Street", "Road", "Avenue", "Lane"];
const EMAIL_LOCALS: &[&str] = &[
    "hcuutaj", "jdoe", "asmith", "mfarrow", "kwhalen", "rbaxter", "tmarsh", "lreyes", "pchan",
    "nosei", "bquimby", "gsloan",
];
const EMAIL_HOSTS: &[&str] = &["bdd", "mailcare", "hitmed", "clinmail", "zmail", "carenet"];
const URL_WORDS: &[&str] = &[
    "mercyclinic", "zenithcare", "lakewoodmed", "healthportal", "chartview", "carelink",
    "medrecords", "clinicnotes", "wardnotes", "intakeforms",
];
const URL_TLDS: &[&str] = &["org", "com", "net"];
const MONTH_NAMES: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];
const SEASONS: &[&str] = &["winter", "spring", "summer", "autumn"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn gen_value(sub: Subcategory, rng: &mut ChaCha8Rng) -> String {
    use Subcategory::*;
    match sub {
        Patient => format!("{} {}", pick(rng, PATIENT_FIRST), pick(rng, PATIENT_LAST)),
        Doctor => pick(rng, DOCTOR_LAST).to_string(),
        Username => format!("{}{:02}", pick(rng, EMAIL_LOCALS), rng.gen_range(0..100)),
        Profession => pick(rng, PROFESSIONS).to_string(),
        Hospital => pick(rng, HOSPITALS).to_string(),
        Organization => pick(rng, ORGANIZATIONS).to_string(),
        Street => format!(
            "{} {} {}",
            rng.gen_range(2..950),
            pick(rng, STREET_NAMES),
            pick(rng, STREET_KINDS)
        ),
        City => pick(rng, CITIES).to_string(),
        State => pick(rng, STATES).to_string(),
        Country => pick(rng, COUNTRIES).to_string(),
        Zip => format!("{:05}", rng.gen_range(0..100_000)),
        LocationOther => pick(rng, LOCATION_OTHERS).to_string(),
        Age => format!("{}", rng.gen_range(18..98)),
        Date => {
            let year = rng.gen_range(2060..2098);
            let month = rng.gen_range(1..13);
            let day = rng.gen_range(1..29);
            match rng.gen_range(0..6) {
                0 => format!("{month:02}/{day:02}/{year}"),
                1 => format!("{month}/{day}/{}", year % 100),
                2 => format!("{month:02}-{day:02}-{year}"),
                3 => format!("{} {year}", MONTH_NAMES[month - 1]),
                4 => format!("{year} {}", pick(rng, SEASONS)),
                _ => format!("{} of {year}", pick(rng, SEASONS)),
            }
        }
        Phone | Fax => format!(
            "{}-{}-{}",
            rng.gen_range(200..990),
            rng.gen_range(100..1000),
            rng.gen_range(1000..10000)
        ),
        Email => format!("{}@{}.com", pick(rng, EMAIL_LOCALS), pick(rng, EMAIL_HOSTS)),
        Url => format!("www.{}.{}", pick(rng, URL_WORDS), pick(rng, URL_TLDS)),
        MedicalRecord => format!("{}", rng.gen_range(1_000_000..10_000_000)),
        HealthPlan => format!("HP{}", rng.gen_range(1_000_000..10_000_000)),
        License => format!("MD{}", rng.gen_range(100_000..1_000_000)),
        IdNum => format!(
            "{}-{:02}-{}",
            rng.gen_range(100..1000),
            rng.gen_range(0..100),
            rng.gen_range(1000..10000)
        ),
    }
}

enum Part {
    Lit(String),
    Slot(Subcategory),
}

struct Template {
    parts: Vec<Part>,
    slots: Vec<Subcategory>,
    glue: bool,
}

fn parse_template(def: &TemplateDef) -> Template {
    let mut parts = Vec::new();
    let mut slots = Vec::new();
    let mut rest = def.text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            parts.push(Part::Lit(rest[..open].to_string()));
        }
        let close = rest[open..].find('}').expect("unclosed slot") + open;
        let sub: Subcategory = rest[open + 1..close]
            .parse()
            .expect("unknown subcategory in template");
        parts.push(Part::Slot(sub));
        slots.push(sub);
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        parts.push(Part::Lit(rest.to_string()));
    }
    Template {
        parts,
        slots,
        glue: def.glue,
    }
}

struct Generator {
    templates: Vec<Template>,
    weights: Vec<(Subcategory, f64)>,
    glue_rate: f64,
}

impl Generator {
    fn new(config: &SynthConfig) -> Result<Self> {
        if config.template_set != DEFAULT_TEMPLATE_SET {
            return Err(DeidError::UnknownTemplateSet(config.template_set.clone()));
        }
        let weights: Vec<(Subcategory, f64)> = config
            .weights
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .cloned()
            .collect();
        if weights.is_empty() && config.count > 0 {
            return Err(DeidError::InvalidArgument(
                "all subcategory weights are zero".into(),
            ));
        }
        Ok(Generator {
            templates: template_defs().iter().map(parse_template).collect(),
            weights,
            glue_rate: config.glue_rate,
        })
    }

    fn pick_subcategory(&self, rng: &mut ChaCha8Rng) -> Subcategory {
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        let mut x = rng.gen_range(0.0..total);
        for (sub, w) in &self.weights {
            if x < *w {
                return *sub;
            }
            x -= w;
        }
        self.weights.last().unwrap().0
    }

    fn pick_template(&self, target: Subcategory, rng: &mut ChaCha8Rng) -> &Template {
        let want_glue = rng.gen_bool(self.glue_rate.clamp(0.0, 1.0));
        let matching = |glue: bool| -> Vec<&Template> {
            self.templates
                .iter()
                .filter(|t| t.glue == glue && t.slots.contains(&target))
                .collect()
        };
        let mut pool = matching(want_glue);
        if pool.is_empty() {
            pool = matching(!want_glue);
        }
        pool[rng.gen_range(0..pool.len())]
    }

    /// Renders one sentence, appending to `text` and recording spans and
    /// the exact filler strings.
    fn render(
        &self,
        template: &Template,
        rng: &mut ChaCha8Rng,
        text: &mut String,
        char_len: &mut usize,
        spans: &mut Vec<PhiSpan>,
        fillers: &mut Vec<String>,
    ) {
        for part in &template.parts {
            match part {
                Part::Lit(s) => {
                    text.push_str(s);
                    *char_len += s.chars().count();
                }
                Part::Slot(sub) => {
                    let value = gen_value(*sub, rng);
                    let n = value.chars().count();
                    spans.push(PhiSpan::new(*char_len, *char_len + n, *sub));
                    fillers.push(value.clone());
                    text.push_str(&value);
                    *char_len += n;
                }
            }
        }
    }
}

pub(crate) fn generate_with_fillers(
    config: &SynthConfig,
) -> Result<Vec<(Document, Vec<String>)>> {
    let generator = Generator::new(config)?;
    (0..config.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, i as u64));
            let mut text = String::new();
            let mut char_len = 0usize;
            let mut spans = Vec::new();
            let mut fillers = Vec::new();
            let n_sentences = rng.gen_range(4..9);
            for s in 0..n_sentences {
                if s > 0 {
                    let sep = if rng.gen_bool(0.6) { '\n' } else { ' ' };
                    text.push(sep);
                    char_len += 1;
                }
                if rng.gen_bool(0.18) {
                    let filler = FILLERS[rng.gen_range(0..FILLERS.len())];
                    text.push_str(filler);
                    char_len += filler.chars().count();
                } else {
                    let target = generator.pick_subcategory(&mut rng);
                    let template = generator.pick_template(target, &mut rng);
                    generator.render(
                        template,
                        &mut rng,
                        &mut text,
                        &mut char_len,
                        &mut spans,
                        &mut fillers,
                    );
                }
            }
            let doc = Document::new(format!("synth-{i:04}"), text, spans)?;
            Ok((doc, fillers))
        })
        .collect()
}

/// Generates a synthetic corpus. Pure function of the config: the same
/// config yields byte-identical documents.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<Document>> {
    Ok(generate_with_fillers(config)?
        .into_iter()
        .map(|(doc, _)| doc)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{serialize_record, SpanKind};
    use std::collections::HashSet;

    #[test]
    fn zero_count_gives_empty_corpus() {
        let docs = generate_synthetic(&SynthConfig::new(0, 7)).unwrap();
        assert!(docs.is_empty());
    }

    #[test]
    fn same_config_is_byte_identical() {
        let config = SynthConfig::new(20, 42);
        let a = generate_synthetic(&config).unwrap();
        let b = generate_synthetic(&config).unwrap();
        let ser = |docs: &[Document]| -> Vec<Vec<u8>> {
            docs.iter()
                .map(|d| serialize_record(d, SpanKind::Gold, &[]))
                .collect()
        };
        assert_eq!(ser(&a), ser(&b));
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_synthetic(&SynthConfig::new(5, 1)).unwrap();
        let b = generate_synthetic(&SynthConfig::new(5, 2)).unwrap();
        assert_ne!(a[0].text, b[0].text);
    }

    #[test]
    fn spans_slice_to_their_fillers() {
        for (doc, fillers) in generate_with_fillers(&SynthConfig::new(30, 11)).unwrap() {
            assert_eq!(doc.gold.len(), fillers.len());
            for (span, filler) in doc.gold.iter().zip(&fillers) {
                assert_eq!(doc.slice(span.start, span.end), *filler);
            }
        }
    }

    #[test]
    fn all_weighted_subcategories_appear_in_200_docs() {
        let docs = generate_synthetic(&SynthConfig::new(200, 1)).unwrap();
        let seen: HashSet<Subcategory> = docs
            .iter()
            .flat_map(|d| d.gold.iter().map(|s| s.subcategory))
            .collect();
        for (sub, w) in default_weights() {
            if w > 0.0 {
                assert!(seen.contains(&sub), "{sub} never generated");
            }
        }
    }

    #[test]
    fn unknown_template_set_is_rejected() {
        let mut config = SynthConfig::new(1, 1);
        config.template_set = "no-such-set".into();
        assert!(matches!(
            generate_synthetic(&config),
            Err(DeidError::UnknownTemplateSet(_))
        ));
    }
}
