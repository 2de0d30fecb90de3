//! Deterministic synthetic platform data with planted regularities.
//!
//! Merchants are spread over district clusters of one city. Daily order
//! counts follow per-category weather, season and day-period multipliers,
//! users order mostly from a few favourite categories chosen by segment, and
//! reviews carry two annotators who mostly agree. Everything is a function
//! of the [`FixtureSpec`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use time::{Date, Duration, Month};

use crate::platform::{
    format_date, Action, AnnotationRecord, CalendarDay, GeoPoint, Hemisphere, InteractionRecord, Lexicon,
    LexiconEntry, Location, MerchantRecord, OpeningInterval, Product, ReviewDimension, ReviewRecord, Season,
    Store, StoreBundle, UserRecord, Weather, DEFAULT_UTC_OFFSET_MINUTES,
};
use crate::rng::{derive_seed, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureSpec {
    pub city: String,
    pub seed: u64,
    pub merchants: usize,
    pub users: usize,
    pub days: usize,
    /// Mean orders per merchant per day before multipliers.
    pub daily_orders: f64,
    pub browses: usize,
    pub searches: usize,
    pub reviews: usize,
    pub review_clicks: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl FixtureSpec {
    /// Small store for synthesis and smoke tests.
    pub fn small() -> Self {
        Self {
            city: "Hangzhou".into(),
            seed: 7,
            merchants: 50,
            users: 100,
            days: 365,
            daily_orders: 0.02,
            browses: 60,
            searches: 40,
            reviews: 40,
            review_clicks: 20,
        }
    }

    /// Store large enough for 13 questions of every task type.
    pub fn benchmark() -> Self {
        Self {
            city: "Hangzhou".into(),
            seed: 7,
            merchants: 80,
            users: 300,
            days: 365,
            daily_orders: 0.8,
            browses: 1500,
            searches: 300,
            reviews: 240,
            review_clicks: 150,
        }
    }
}

pub const SEGMENTS: [&str; 5] = ["student", "young professional", "family with children", "retiree", "business traveler"];

struct Leaf {
    path: [&'static str; 3],
    products: &'static [(&'static str, u32)],
    /// (open, close) in minutes, every day.
    hours: (u16, u16),
    /// Morning, lunch, afternoon, dinner, late night.
    periods: [f64; 5],
    rainy: f64,
    /// Spring, summer, autumn, winter.
    seasons: [f64; 4],
    segments: [f64; 5],
    tags: &'static [&'static str],
}

const fn leaf(
    path: [&'static str; 3],
    products: &'static [(&'static str, u32)],
    hours: (u16, u16),
    periods: [f64; 5],
    rainy: f64,
    seasons: [f64; 4],
    segments: [f64; 5],
    tags: &'static [&'static str],
) -> Leaf {
    Leaf { path, products, hours, periods, rainy, seasons, segments, tags }
}

const FLAT: [f64; 4] = [1.0, 1.0, 1.0, 1.0];

const LEAVES: [Leaf; 20] = [
    leaf(["Food", "Chinese", "Hotpot"], &[("spicy beef tallow broth", 68), ("sliced lamb", 58), ("tofu skin", 18), ("shrimp paste", 42)], (660, 1440), [0.02, 0.2, 0.05, 0.55, 0.18], 1.0, [0.8, 0.5, 1.0, 2.0], [0.1, 0.45, 0.25, 0.05, 0.15], &["good for groups", "late-night dining", "private rooms for gatherings"]),
    leaf(["Food", "Chinese", "Noodles"], &[("beef noodle soup", 26), ("scallion oil noodles", 18), ("braised pork noodles", 28)], (420, 1260), [0.25, 0.5, 0.05, 0.15, 0.05], 1.0, FLAT, [0.5, 0.2, 0.1, 0.15, 0.05], &["quick bite", "solo dining", "budget meal"]),
    leaf(["Food", "Chinese", "Dim Sum"], &[("shrimp dumplings", 32), ("char siu buns", 22), ("egg tarts", 16), ("rice rolls", 24)], (420, 1200), [0.55, 0.3, 0.08, 0.05, 0.02], 1.0, FLAT, [0.05, 0.1, 0.3, 0.5, 0.05], &["family outing", "morning tea", "traditional flavors"]),
    leaf(["Food", "Western", "Steakhouse"], &[("ribeye steak", 268), ("caesar salad", 58), ("mushroom soup", 38)], (690, 1380), [0.0, 0.25, 0.05, 0.65, 0.05], 1.0, FLAT, [0.02, 0.25, 0.08, 0.05, 0.6], &["date night", "business meeting", "wine pairing"]),
    leaf(["Food", "Western", "Pizza"], &[("margherita pizza", 68), ("pepperoni pizza", 78), ("garlic bread", 22)], (660, 1320), [0.02, 0.35, 0.1, 0.43, 0.1], 1.0, FLAT, [0.55, 0.2, 0.15, 0.02, 0.08], &["good for groups", "kids favorite", "sharing platters"]),
    leaf(["Food", "Japanese", "Sushi"], &[("salmon nigiri", 38), ("eel roll", 48), ("miso soup", 12), ("tuna sashimi", 88)], (660, 1320), [0.0, 0.45, 0.05, 0.45, 0.05], 1.0, FLAT, [0.1, 0.55, 0.1, 0.05, 0.2], &["date night", "fresh seafood", "counter seating"]),
    leaf(["Food", "Dessert", "Ice Cream"], &[("vanilla cone", 12), ("mango sundae", 28), ("matcha scoop", 16)], (600, 1320), [0.03, 0.12, 0.55, 0.25, 0.05], 0.5, [1.0, 2.2, 0.9, 0.4], [0.5, 0.15, 0.3, 0.03, 0.02], &["sweet treats", "kids favorite", "summer cooling"]),
    leaf(["Food", "Dessert", "Bakery"], &[("croissant", 14), ("cheesecake slice", 32), ("sourdough loaf", 36)], (420, 1260), [0.5, 0.1, 0.3, 0.08, 0.02], 1.0, FLAT, [0.15, 0.5, 0.2, 0.1, 0.05], &["breakfast", "takeaway friendly", "fresh baked daily"]),
    leaf(["Food", "Drinks", "Coffee"], &[("latte", 32), ("americano", 26), ("flat white", 34)], (450, 1200), [0.6, 0.1, 0.22, 0.06, 0.02], 1.0, FLAT, [0.1, 0.6, 0.05, 0.05, 0.2], &["work-friendly", "free refills", "quiet corner"]),
    leaf(["Food", "Drinks", "Milk Tea"], &[("brown sugar boba", 18), ("fruit tea", 22), ("cheese foam oolong", 24)], (600, 1380), [0.02, 0.2, 0.5, 0.2, 0.08], 0.6, [1.0, 1.8, 1.0, 0.6], [0.65, 0.15, 0.1, 0.02, 0.08], &["sweet treats", "takeaway friendly", "student favorite"]),
    leaf(["Delivery", "Meals", "Fast Food Delivery"], &[("fried chicken bucket", 59), ("burger combo", 35), ("french fries", 12)], (600, 1440), [0.05, 0.35, 0.05, 0.4, 0.15], 2.2, FLAT, [0.45, 0.35, 0.1, 0.02, 0.08], &["fast delivery", "late-night dining", "budget meal"]),
    leaf(["Delivery", "Grocery", "Fresh Produce"], &[("organic spinach", 9), ("free-range eggs", 24), ("seasonal fruit box", 49)], (420, 1320), [0.45, 0.1, 0.15, 0.25, 0.05], 1.9, FLAT, [0.02, 0.2, 0.55, 0.2, 0.03], &["fast delivery", "healthy choice", "family essentials"]),
    leaf(["Leisure", "Wellness", "Spa"], &[("aromatherapy massage", 298), ("foot bath", 128), ("hot stone therapy", 358)], (660, 1440), [0.03, 0.05, 0.3, 0.35, 0.27], 1.0, [0.9, 0.6, 1.0, 1.6], [0.02, 0.3, 0.1, 0.18, 0.4], &["relaxation", "couples package", "private rooms for gatherings"]),
    leaf(["Leisure", "Fitness", "Gym"], &[("monthly pass", 299), ("personal training session", 200), ("yoga class", 80)], (360, 1320), [0.45, 0.05, 0.05, 0.4, 0.05], 0.8, [1.6, 1.0, 0.9, 0.7], [0.3, 0.55, 0.03, 0.05, 0.07], &["healthy choice", "showers available", "work-friendly"]),
    leaf(["Leisure", "Entertainment", "KTV"], &[("small room 3 hours", 168), ("party room", 388), ("fruit platter", 58)], (720, 1440), [0.0, 0.02, 0.13, 0.3, 0.55], 1.8, FLAT, [0.55, 0.35, 0.05, 0.02, 0.03], &["good for groups", "late-night dining", "birthday parties"]),
    leaf(["Leisure", "Entertainment", "Cinema"], &[("standard ticket", 45), ("imax ticket", 85), ("popcorn combo", 38)], (600, 1440), [0.03, 0.1, 0.3, 0.42, 0.15], 1.7, FLAT, [0.4, 0.35, 0.15, 0.05, 0.05], &["date night", "kids favorite", "rainy day plan"]),
    leaf(["Services", "Beauty", "Hair Salon"], &[("haircut", 88), ("hair coloring", 368), ("scalp treatment", 158)], (600, 1320), [0.1, 0.15, 0.55, 0.15, 0.05], 1.0, FLAT, [0.15, 0.55, 0.15, 0.1, 0.05], &["appointment required", "stylist consultation", "relaxation"]),
    leaf(["Services", "Beauty", "Nail Salon"], &[("gel manicure", 128), ("pedicure", 98), ("nail art", 168)], (600, 1320), [0.05, 0.15, 0.55, 0.2, 0.05], 1.0, FLAT, [0.3, 0.55, 0.05, 0.03, 0.07], &["appointment required", "couples package", "trendy designs"]),
    leaf(["Services", "Home", "Laundry"], &[("wash and fold per kg", 15), ("dry cleaning suit", 45), ("shoe cleaning", 39)], (480, 1260), [0.55, 0.1, 0.15, 0.15, 0.05], 0.9, FLAT, [0.2, 0.2, 0.5, 0.08, 0.02], &["pickup service", "family essentials", "same-day service"]),
    leaf(["Hotel", "Lodging", "Budget Hotel"], &[("standard room night", 199), ("twin room night", 239), ("breakfast add-on", 25)], (0, 1440), [0.05, 0.05, 0.2, 0.3, 0.4], 1.0, [1.0, 1.3, 1.1, 0.7], [0.1, 0.15, 0.1, 0.05, 0.6], &["open 24 hours", "business meeting", "pickup service"]),
];

/// Attribute dimensions; values are unique across dimensions.
const ATTRIBUTES: [(&str, &[&str]); 8] = [
    ("parking", &["free parking", "paid parking", "no parking"]),
    ("seating", &["private rooms", "open hall", "counter seats"]),
    ("payment", &["cash only", "mobile payment", "card accepted"]),
    ("wifi", &["free wifi", "no wifi"]),
    ("pets", &["pets allowed", "no pets"]),
    ("price_level", &["budget", "mid-range", "upscale"]),
    ("service", &["delivery available", "dine-in only", "takeaway"]),
    ("ambience", &["quiet", "lively", "family friendly"]),
];

const DISTRICTS: [(&str, [(&str, f64, f64); 2]); 6] = [
    ("Shangcheng", [("Hubin", 30.2590, 120.1650), ("Wulin Square", 30.2745, 120.1640)]),
    ("Gongshu", [("Grand Canal", 30.3180, 120.1400), ("Dadou Road", 30.3060, 120.1500)]),
    ("Xihu", [("Huanglong", 30.2790, 120.1300), ("Wensan Road", 30.2810, 120.1140)]),
    ("Binjiang", [("Jiangnan Avenue", 30.2090, 120.2120), ("Xixing", 30.1800, 120.1950)]),
    ("Xiaoshan", [("Qianjiang Century City", 30.2350, 120.2580), ("Xiaoshan Center", 30.1650, 120.2650)]),
    ("Yuhang", [("Future Sci-Tech City", 30.2900, 120.0050), ("Linping", 30.4200, 120.3000)]),
];

const STREETS: [&str; 12] = [
    "Yan'an", "Pinghai", "Fengqi", "Tiyuchang", "Moganshan", "Shixiang", "Wener", "Gucui", "Binsheng", "Jiangling",
    "Shixin", "Wenyi",
];

const NAME_HEADS: [&str; 24] = [
    "Golden", "Jade", "Lakeside", "Red Lantern", "Silver", "Bamboo", "Maple", "Harbor", "Lotus", "Cloud", "Sunrise",
    "Willow", "Orchid", "Pearl", "River", "Summit", "Breeze", "Crimson", "Evergreen", "Lucky", "Moonlight",
    "Old Street", "Peony", "Starlight",
];

const BRANDS: [(&str, u8); 16] = [
    ("Haidilao", 3), ("Xiaolongkan", 2), ("Lanzhou Lamian House", 1), ("Tim Ho Wan", 2), ("Wang Steak", 3),
    ("Pizza Hut", 2), ("Sushiro", 2), ("Baskin Robbins", 2), ("Mixue", 1), ("Heytea", 2), ("Starbucks", 3),
    ("Luckin", 1), ("KFC", 1), ("Pagoda Fresh", 2), ("Wanda Cinemas", 2), ("Home Inn", 1),
];

const SIMILAR_BRANDS: [(&str, &str); 8] = [
    ("Haidilao", "Xiaolongkan"), ("Starbucks", "Luckin"), ("Heytea", "Mixue"), ("KFC", "Pizza Hut"),
    ("Sushiro", "Tim Ho Wan"), ("Baskin Robbins", "Mixue"), ("Wang Steak", "Pizza Hut"), ("Home Inn", "Wanda Cinemas"),
];

/// Brand candidates per leaf index.
const LEAF_BRANDS: [&[&str]; 20] = [
    &["Haidilao", "Xiaolongkan"], &["Lanzhou Lamian House"], &["Tim Ho Wan"], &["Wang Steak"], &["Pizza Hut"],
    &["Sushiro"], &["Baskin Robbins"], &[], &["Starbucks", "Luckin"], &["Heytea", "Mixue"], &["KFC"], &["Pagoda Fresh"],
    &[], &[], &[], &["Wanda Cinemas"], &[], &[], &[], &["Home Inn"],
];

fn lexicon() -> Lexicon {
    let mut e = Vec::new();
    let syn = |e: &mut Vec<LexiconEntry>, a: &str, b: &str| e.push(LexiconEntry::Synonym { a: a.into(), b: b.into() });
    for (a, b) in [
        ("free wifi", "complimentary wifi"),
        ("complimentary wifi", "wireless internet"),
        ("private rooms", "private booths"),
        ("mobile payment", "QR code payment"),
        ("family friendly", "kid friendly"),
        ("upscale", "high-end"),
        ("high-end", "premium"),
        ("budget", "affordable"),
        ("takeaway", "takeout"),
        ("takeout", "to-go"),
        ("free parking", "complimentary parking"),
        ("lively", "bustling"),
    ] {
        syn(&mut e, a, b);
    }
    for (broad, narrow) in [
        ("card accepted", "credit card"),
        ("card accepted", "debit card"),
        ("delivery available", "express delivery"),
        ("express delivery", "30-minute delivery"),
        ("family friendly", "baby chairs"),
        ("private rooms", "VIP room"),
        ("lively", "live music"),
        ("pets allowed", "dogs allowed"),
        ("pets allowed", "cats allowed"),
        ("upscale", "michelin-starred"),
        ("mobile payment", "Alipay"),
        ("mobile payment", "WeChat Pay"),
        ("open hall", "outdoor terrace"),
        ("quiet", "reading corner"),
    ] {
        e.push(LexiconEntry::Contains { broad: broad.into(), narrow: narrow.into() });
    }
    for (a, b) in [
        ("cash only", "card accepted"),
        ("cash only", "mobile payment"),
        ("dine-in only", "delivery available"),
        ("dine-in only", "takeaway"),
        ("quiet", "lively"),
        ("budget", "upscale"),
        ("no parking", "free parking"),
        ("no parking", "paid parking"),
        ("pets allowed", "no pets"),
        ("free wifi", "no wifi"),
        ("private rooms", "counter seats"),
    ] {
        e.push(LexiconEntry::Incompatible { a: a.into(), b: b.into() });
    }
    for (c, k) in [
        ("Hotpot", "Milk Tea"),
        ("Cinema", "Ice Cream"),
        ("Cinema", "Pizza"),
        ("KTV", "Fast Food Delivery"),
        ("Gym", "Fresh Produce"),
        ("Spa", "Hair Salon"),
        ("Coffee", "Bakery"),
        ("Bakery", "Coffee"),
        ("Steakhouse", "Ice Cream"),
        ("Budget Hotel", "Laundry"),
        ("Noodles", "Dim Sum"),
        ("Nail Salon", "Hair Salon"),
        ("Sushi", "Milk Tea"),
        ("Pizza", "Cinema"),
    ] {
        e.push(LexiconEntry::Complement { category: c.into(), complement: k.into() });
    }
    for (b, t) in BRANDS {
        e.push(LexiconEntry::BrandTier { brand: b.into(), tier: t });
    }
    for (a, b) in SIMILAR_BRANDS {
        e.push(LexiconEntry::SimilarBrand { a: a.into(), b: b.into() });
    }
    Lexicon::new(e)
}

fn weighted(weights: &[f64], rng: &mut SplitMix64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.next_f64() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

fn poisson(lambda: f64, rng: &mut SplitMix64) -> u32 {
    let l = (-lambda).exp();
    let (mut k, mut p) = (0u32, 1.0);
    loop {
        p *= rng.next_f64();
        if p <= l {
            return k;
        }
        k += 1;
    }
}

const PERIOD_SPANS: [(u16, u16); 5] = [(360, 660), (660, 840), (840, 1020), (1020, 1260), (1260, 1800)];

fn start_date() -> Date {
    Date::from_calendar_date(2024, Month::January, 1).expect("valid date")
}

fn local_epoch(date: Date, minute_of_day: i64, second: i64) -> i64 {
    date.midnight().assume_utc().unix_timestamp() + minute_of_day * 60 + second
        - DEFAULT_UTC_OFFSET_MINUTES as i64 * 60
}

struct Planted {
    leaf: usize,
    rate: f64,
    point: GeoPoint,
}

/// Build the fixture bundle.
pub fn generate_fixture(spec: &FixtureSpec) -> StoreBundle {
    let mut rng = SplitMix64::new(derive_seed(spec.seed, "fixture"));
    let city = spec.city.clone();
    let start = start_date();

    // Calendar: weekends and a few festivals are holidays; weather is
    // independent of season so the two effects do not confound.
    let festivals: BTreeSet<(Month, u8)> =
        [(Month::January, 1), (Month::May, 1), (Month::May, 2), (Month::October, 1), (Month::October, 2), (Month::October, 3)]
            .into();
    let mut calendar = Vec::new();
    for i in 0..spec.days {
        let date = start + Duration::days(i as i64);
        let weekend = date.weekday().number_days_from_monday() >= 5;
        let r = rng.next_f64();
        let weather = if r < 0.3 { Weather::Rainy } else if r < 0.9 { Weather::Sunny } else { Weather::Other };
        calendar.push(CalendarDay {
            city: city.clone(),
            date: format_date(date),
            weather,
            is_holiday: weekend || festivals.contains(&(date.month(), date.day())),
            season: Season::of_month(date.month(), Hemisphere::Northern),
            extra: Default::default(),
        });
    }

    // Merchants.
    let mut merchants = Vec::new();
    let mut planted = Vec::new();
    let mut used_names = BTreeSet::new();
    for i in 0..spec.merchants {
        let li = i % LEAVES.len();
        let lf = &LEAVES[li];
        let (district, bds) = DISTRICTS[rng.below_usize(DISTRICTS.len())];
        let bdi = rng.below_usize(2);
        let (bd, lat0, lon0) = bds[bdi];
        let point = GeoPoint::new(
            lat0 + (rng.next_f64() - 0.5) * 0.012,
            lon0 + (rng.next_f64() - 0.5) * 0.014,
        );
        let brand = LEAF_BRANDS[li]
            .get(rng.below_usize(LEAF_BRANDS[li].len().max(1)))
            .filter(|_| rng.below(3) > 0)
            .map(|b| b.to_string());
        // One deliberate chain duplicate so name-uniqueness filtering matters.
        let name = if i == LEAVES.len() && spec.merchants > LEAVES.len() {
            merchants.first().map(|m: &MerchantRecord| m.name.clone()).unwrap_or_default()
        } else {
            let mut n;
            loop {
                n = format!("{} {} {}", NAME_HEADS[rng.below_usize(NAME_HEADS.len())], bd, lf.path[2]);
                if used_names.insert(n.clone()) {
                    break;
                }
                n = format!("{} No.{}", n, i + 1);
                if used_names.insert(n.clone()) {
                    break;
                }
            }
            n
        };
        let mut attributes = BTreeMap::new();
        for (dim, values) in ATTRIBUTES {
            attributes.insert(dim.to_string(), values[rng.below_usize(values.len())].to_string());
        }
        let idx = rng.sample_indices(lf.tags.len(), 2);
        let function_tags: Vec<String> = idx.iter().map(|i| lf.tags[*i].to_string()).collect();
        let products: Vec<Product> = lf
            .products
            .iter()
            .map(|(n, p)| Product { name: n.to_string(), price: Some(p + rng.below(5) as u32 * 2) })
            .collect();
        let introduction = format!(
            "{} {} {} spot near {bd} serving {} and {}. We offer {} and {}, with a {} atmosphere",
            if attributes["price_level"].starts_with(['a', 'e', 'i', 'o', 'u']) { "An" } else { "A" },
            attributes["price_level"],
            lf.path[2].to_lowercase(),
            products[0].name,
            products[1].name,
            attributes["parking"],
            attributes["wifi"],
            attributes["ambience"],
        );
        let late = lf.hours.1 > 1380;
        let weekend_close = if late { lf.hours.1 } else { (lf.hours.1 + 60).min(1440) };
        let operating_hours = (0u8..7)
            .map(|d| OpeningInterval { weekday: d, open: lf.hours.0, close: if d >= 5 { weekend_close } else { lf.hours.1 } })
            .collect();
        let merchant_id = format!("m{:04}", i + 1);
        merchants.push(MerchantRecord {
            merchant_id,
            name,
            introduction,
            category_path: lf.path.iter().map(|s| s.to_string()).collect(),
            brand,
            location: Location {
                latitude: point.latitude,
                longitude: point.longitude,
                address: format!("No. {} {} Road", 1 + rng.below(480), STREETS[(DISTRICTS.iter().position(|d| d.0 == district).unwrap() * 2 + bdi) % STREETS.len()]),
            },
            operating_hours,
            city: city.clone(),
            district: Some(district.to_string()),
            business_district: Some(bd.to_string()),
            attributes,
            products,
            function_tags,
            extra: Default::default(),
        });
        planted.push(Planted { leaf: li, rate: spec.daily_orders * (0.6 + 0.8 * rng.next_f64()), point });
    }

    // Users: a segment and four favourite categories drawn by segment affinity.
    let mut users = Vec::new();
    let mut favourites: Vec<Vec<usize>> = Vec::new();
    let ages = ["18-24", "25-34", "35-44", "45-59", "60+"];
    let spend = ["low", "medium", "high"];
    for i in 0..spec.users {
        let seg = i % SEGMENTS.len();
        let age = match seg {
            0 => ages[0],
            1 => ages[1 + rng.below_usize(2)],
            2 => ages[1 + rng.below_usize(3)],
            3 => ages[3 + rng.below_usize(2)],
            _ => ages[1 + rng.below_usize(3)],
        };
        let mut profile = BTreeMap::new();
        profile.insert("segment".to_string(), SEGMENTS[seg].to_string());
        profile.insert("age_group".to_string(), age.to_string());
        profile.insert("gender".to_string(), if rng.below(2) == 0 { "female" } else { "male" }.to_string());
        profile.insert("spending_level".to_string(), spend[rng.below_usize(3)].to_string());
        let mut favs = BTreeSet::new();
        let affinity: Vec<f64> = LEAVES.iter().map(|l| l.segments[seg].powi(2) + 0.002).collect();
        while favs.len() < 4 {
            favs.insert(weighted(&affinity, &mut rng));
        }
        favourites.push(favs.into_iter().collect());
        users.push(UserRecord { user_id: format!("u{:04}", i + 1), profile, city: city.clone(), extra: Default::default() });
    }
    let fans: Vec<Vec<Vec<usize>>> = LEAVES
        .iter()
        .enumerate()
        .map(|(li, _)| {
            (0..SEGMENTS.len())
                .map(|s| (0..users.len()).filter(|u| u % SEGMENTS.len() == s && favourites[*u].contains(&li)).collect())
                .collect()
        })
        .collect();
    let pick_user = |li: usize, rng: &mut SplitMix64| -> Option<usize> {
        let lf = &LEAVES[li];
        for _ in 0..4 {
            let s = weighted(&lf.segments, rng);
            let pool = &fans[li][s];
            if !pool.is_empty() {
                return Some(pool[rng.below_usize(pool.len())]);
            }
        }
        let any: Vec<usize> = fans[li].iter().flatten().copied().collect();
        (!any.is_empty()).then(|| any[rng.below_usize(any.len())])
    };
    let jitter = |p: GeoPoint, rng: &mut SplitMix64| {
        GeoPoint::new(p.latitude + (rng.next_f64() - 0.5) * 0.004, p.longitude + (rng.next_f64() - 0.5) * 0.004)
    };

    // Orders: Poisson per merchant-day with planted multipliers.
    let mut interactions = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |it: InteractionRecord, out: &mut Vec<InteractionRecord>| {
        if seen.insert(it.key()) {
            out.push(it);
        }
    };
    for (mi, m) in merchants.iter().enumerate() {
        let p = &planted[mi];
        let lf = &LEAVES[p.leaf];
        for (di, day) in calendar.iter().enumerate() {
            let mut lambda = p.rate;
            if day.weather == Weather::Rainy {
                lambda *= lf.rainy;
            }
            lambda *= lf.seasons[Season::ALL.iter().position(|s| *s == day.season).unwrap()];
            if day.is_holiday {
                lambda *= 1.2;
            }
            let date = start + Duration::days(di as i64);
            for _ in 0..poisson(lambda, &mut rng) {
                let Some(u) = pick_user(p.leaf, &mut rng) else { continue };
                let (a, b) = PERIOD_SPANS[weighted(&lf.periods, &mut rng)];
                let minute = (a as i64 + rng.below((b - a) as u64) as i64) % 1440;
                push(
                    InteractionRecord {
                        user_id: users[u].user_id.clone(),
                        merchant_id: m.merchant_id.clone(),
                        timestamp: local_epoch(date, minute, rng.below(60) as i64),
                        location: jitter(p.point, &mut rng),
                        action: Action::Order,
                        query: None,
                        review_id: None,
                        extra: Default::default(),
                    },
                    &mut interactions,
                );
            }
        }
    }

    let merchants_by_leaf: Vec<Vec<usize>> =
        (0..LEAVES.len()).map(|li| (0..merchants.len()).filter(|m| planted[*m].leaf == li).collect()).collect();
    let random_visit = |u: usize, rng: &mut SplitMix64| -> Option<(usize, Date, i64)> {
        let li = favourites[u][rng.below_usize(favourites[u].len())];
        let ms = &merchants_by_leaf[li];
        if ms.is_empty() {
            return None;
        }
        let day = rng.below_usize(spec.days.max(1));
        Some((ms[rng.below_usize(ms.len())], start + Duration::days(day as i64), 480 + rng.below(840) as i64))
    };

    for _ in 0..spec.browses {
        let u = rng.below_usize(users.len().max(1));
        if let Some((mi, date, minute)) = random_visit(u, &mut rng) {
            let action = if rng.below(2) == 0 { Action::Browse } else { Action::Click };
            push(
                InteractionRecord {
                    user_id: users[u].user_id.clone(),
                    merchant_id: merchants[mi].merchant_id.clone(),
                    timestamp: local_epoch(date, minute, rng.below(60) as i64),
                    location: jitter(planted[mi].point, &mut rng),
                    action,
                    query: None,
                    review_id: None,
                    extra: Default::default(),
                },
                &mut interactions,
            );
        }
    }
    for _ in 0..spec.searches {
        let u = rng.below_usize(users.len().max(1));
        if let Some((mi, date, minute)) = random_visit(u, &mut rng) {
            let m = &merchants[mi];
            let query = match rng.below(3) {
                0 => format!("{} near me", m.leaf_category().to_lowercase()),
                1 => m.products[rng.below_usize(m.products.len())].name.clone(),
                _ => format!("{} {}", m.business_district.clone().unwrap_or_default().to_lowercase(), m.leaf_category().to_lowercase()),
            };
            push(
                InteractionRecord {
                    user_id: users[u].user_id.clone(),
                    merchant_id: m.merchant_id.clone(),
                    timestamp: local_epoch(date, minute, rng.below(60) as i64),
                    location: jitter(planted[mi].point, &mut rng),
                    action: Action::Search,
                    query: Some(query),
                    review_id: None,
                    extra: Default::default(),
                },
                &mut interactions,
            );
        }
    }

    // Reviews written by customers who ordered.
    let orders: Vec<usize> = (0..interactions.len()).filter(|i| interactions[*i].action == Action::Order).collect();
    let mut reviews = Vec::new();
    for r in 0..spec.reviews.min(orders.len()) {
        let it = &interactions[orders[rng.below_usize(orders.len())]];
        let m = merchants.iter().find(|m| m.merchant_id == it.merchant_id).expect("merchant");
        reviews.push(make_review(format!("r{:04}", r + 1), it, m, &mut rng));
    }

    // Review clicks by other users in the same categories.
    let mut clicks = Vec::new();
    for _ in 0..spec.review_clicks {
        if reviews.is_empty() || users.is_empty() {
            break;
        }
        let u = rng.below_usize(users.len());
        let liked: Vec<&ReviewRecord> = reviews
            .iter()
            .filter(|r| r.user_id != users[u].user_id)
            .filter(|r| {
                let mi = merchants.iter().position(|m| m.merchant_id == r.merchant_id).unwrap();
                favourites[u].contains(&planted[mi].leaf)
            })
            .collect();
        if liked.is_empty() {
            continue;
        }
        let r = liked[rng.below_usize(liked.len())];
        let mi = merchants.iter().position(|m| m.merchant_id == r.merchant_id).unwrap();
        let date = start + Duration::days(rng.below_usize(spec.days.max(1)) as i64);
        clicks.push(InteractionRecord {
            user_id: users[u].user_id.clone(),
            merchant_id: r.merchant_id.clone(),
            timestamp: local_epoch(date, 600 + rng.below(600) as i64, rng.below(60) as i64),
            location: jitter(planted[mi].point, &mut rng),
            action: Action::Click,
            query: None,
            review_id: Some(r.review_id.clone()),
            extra: Default::default(),
        });
    }
    for c in clicks {
        push(c, &mut interactions);
    }
    interactions.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.key().cmp(&b.key())));

    let (bundle, issues) = StoreBundle::assemble(
        Store::from_records(merchants),
        Store::from_records(users),
        Store::from_records(interactions),
        Store::from_records(reviews),
        Store::from_records(calendar),
        lexicon(),
        DEFAULT_UTC_OFFSET_MINUTES,
    );
    debug_assert!(issues.is_empty(), "fixture integrity: {issues:?}");
    bundle
}

const POINTS: [&str; 6] = [
    "The portions were generous.",
    "Staff answered every question patiently.",
    "Prices matched the menu online.",
    "The place was spotless.",
    "Waiting time was under ten minutes.",
    "Seats by the window have a nice view.",
];

fn make_review(review_id: String, it: &InteractionRecord, m: &MerchantRecord, rng: &mut SplitMix64) -> ReviewRecord {
    let info = rng.below_usize(5);
    let guidance = rng.below(2) == 0;
    let colloquial = rng.below(2) == 0;
    let example = rng.below(2) == 0;
    let appeal = rng.below(2) == 0;
    let marketing = rng.below(5) < 2;
    let ai = rng.below(5) < 2;
    let mut parts = Vec::new();
    parts.push(if colloquial {
        format!("Honestly, {} was pretty awesome, no kidding.", m.name)
    } else {
        format!("My visit to {} met expectations.", m.name)
    });
    if example {
        parts.push(format!(
            "Last {} I came with two friends and we ordered the {}.",
            ["Monday", "Friday", "Saturday", "Sunday"][rng.below_usize(4)],
            m.products[rng.below_usize(m.products.len())].name
        ));
    }
    for i in rng.sample_indices(POINTS.len(), info.min(POINTS.len())) {
        parts.push(POINTS[i].to_string());
    }
    if appeal {
        parts.push("Every bite burst with flavor, like a little festival on the plate.".into());
    }
    if guidance {
        parts.push("Tip: book a day ahead on weekends and ask for the set menu.".into());
    }
    if marketing {
        parts.push("Use code SAVE20 today for 20% off, limited offer!".into());
    }
    if ai {
        parts.push("In conclusion, this establishment offers a comprehensive and well-rounded experience for all.".into());
    }
    let useful = info >= 2 && (guidance || example) && !marketing;
    let labels: [(ReviewDimension, String); 8] = [
        (ReviewDimension::InformationPoints, info.to_string()),
        (ReviewDimension::GuidanceValue, yn(guidance)),
        (ReviewDimension::Colloquialism, yn(colloquial)),
        (ReviewDimension::RealExamples, yn(example)),
        (ReviewDimension::LanguageAppeal, yn(appeal)),
        (ReviewDimension::NonMarketing, yn(!marketing)),
        (ReviewDimension::HumanWritten, yn(!ai)),
        (ReviewDimension::OverallUsefulness, yn(useful)),
    ];
    let mut annotations = Vec::new();
    for annotator in ["ann1", "ann2"] {
        for (dim, truth) in &labels {
            let label = if rng.next_f64() < 0.92 {
                truth.clone()
            } else if *dim == ReviewDimension::InformationPoints {
                (info + 1).to_string()
            } else {
                yn(truth == "no")
            };
            annotations.push(AnnotationRecord { annotator_id: annotator.into(), dimension: *dim, label });
        }
    }
    ReviewRecord {
        review_id,
        user_id: it.user_id.clone(),
        merchant_id: m.merchant_id.clone(),
        text: parts.join(" "),
        annotations,
        extra: Default::default(),
    }
}

fn yn(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}
