//! Product inventories of the synthetic domains.
//!
//! Phrases are written as space-separated `TAG:word` pairs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Electronics,
    Kitchenware,
    OutdoorGear,
}

impl Domain {
    pub const ALL: [Domain; 3] = [
        Domain::Electronics,
        Domain::Kitchenware,
        Domain::OutdoorGear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Electronics => "electronics",
            Domain::Kitchenware => "kitchenware",
            Domain::OutdoorGear => "outdoor_gear",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        Domain::ALL.into_iter().find(|d| d.name() == s)
    }

    pub(crate) fn inventory(self) -> &'static Inventory {
        match self {
            Domain::Electronics => &ELECTRONICS,
            Domain::Kitchenware => &KITCHENWARE,
            Domain::OutdoorGear => &OUTDOOR,
        }
    }
}

/// `(verb, preposition, place)` for "Can you {verb} it {prep} {place}?".
pub(crate) type Usage = (&'static str, &'static str, &'static str);

pub(crate) struct Inventory {
    /// Product names; the last word is the common noun.
    pub products: &'static [&'static str],
    pub features: &'static [&'static str],
    pub accessories: &'static [&'static str],
    pub devices: &'static [&'static str],
    pub usages: &'static [Usage],
    /// Verb phrases after "if you" for positive answers.
    pub conditions_yes: &'static [&'static str],
    pub conditions_no: &'static [&'static str],
}

static ELECTRONICS: Inventory = Inventory {
    products: &[
        "NNP:Dell NNP:XPS CD:13 NN:laptop",
        "NNP:Lenovo NNP:ThinkPad NNP:X1 NN:laptop",
        "NNP:Samsung NNP:Galaxy NNP:A20 NN:phone",
        "NNP:Apple NNP:iPad NNP:Air NN:tablet",
        "NNP:Sony NNP:Bravia NNP:X90 NN:television",
        "NNP:LG NNP:UltraGear CD:27 NN:monitor",
        "NNP:JBL NNP:Flip CD:5 NN:speaker",
        "NNP:Canon NNP:EOS NNP:R50 NN:camera",
    ],
    features: &[
        "DT:a JJ:backlit NN:keyboard",
        "DT:a NN:touchscreen",
        "DT:a NN:fingerprint NN:reader",
        "DT:a NN:webcam",
        "DT:a NN:headphone NN:jack",
        "DT:a NN:usb NN:port",
        "DT:an NN:hdmi NN:port",
        "DT:a NN:microphone",
        "JJ:wireless NN:charging",
        "DT:a NN:memory NN:card NN:slot",
    ],
    accessories: &[
        "DT:a NN:charger",
        "DT:a NN:carrying NN:case",
        "DT:a NN:remote NN:control",
        "DT:a NN:screen NN:protector",
        "DT:a NN:usb NN:cable",
        "DT:a NN:wall NN:mount",
    ],
    devices: &[
        "DT:a NN:game NN:console",
        "DT:an NNP:iPhone",
        "DT:a NNP:Mac",
        "DT:a JJ:smart NN:tv",
        "DT:a NN:projector",
        "DT:a NN:car NN:stereo",
    ],
    usages: &[
        ("use", "in", "DT:the NN:rain"),
        ("charge", "in", "DT:the NN:car"),
        ("take", "on", "DT:a NN:plane"),
        ("mount", "on", "DT:the NN:wall"),
    ],
    conditions_yes: &[
        "VB:buy DT:the JJ:premium NN:version",
        "VB:update DT:the NN:software",
        "VB:use DT:an NN:adapter",
    ],
    conditions_no: &[
        "VB:buy DT:the JJ:basic NN:version",
        "VB:skip DT:the NN:update",
        "VB:use DT:the JJ:old NN:firmware",
    ],
};

static KITCHENWARE: Inventory = Inventory {
    products: &[
        "NNP:KitchenAid NNP:Artisan NN:mixer",
        "NNP:Ninja NNP:Foodi NN:blender",
        "NNP:Instant NNP:Pot NNP:Duo NN:cooker",
        "NNP:Lodge NNP:Classic NN:skillet",
        "NNP:Cuisinart NNP:Elite NN:processor",
        "NNP:Keurig NNP:K-Mini NN:brewer",
        "NNP:Breville NNP:Smart NN:oven",
        "NNP:Zojirushi NNP:Neuro NN:rice-cooker",
    ],
    features: &[
        "DT:a NN:glass NN:lid",
        "DT:a NN:timer",
        "DT:a JJ:nonstick NN:coating",
        "DT:a JJ:digital NN:display",
        "DT:a NN:steel NN:bowl",
        "DT:a NN:pouring NN:shield",
        "DT:an NN:auto NN:shutoff",
        "DT:a NN:dough NN:hook",
        "DT:a NN:keep-warm NN:setting",
        "DT:a NN:drip NN:tray",
    ],
    accessories: &[
        "DT:a NN:recipe NN:book",
        "DT:a NN:spatula",
        "DT:a NN:measuring NN:cup",
        "DT:a JJ:second NN:bowl",
        "DT:a NN:cleaning NN:brush",
        "DT:a NN:travel NN:lid",
    ],
    devices: &[
        "DT:an NN:induction NN:cooktop",
        "DT:a NN:gas NN:stove",
        "DT:a JJ:smart NN:speaker",
        "DT:a NN:camping NN:stove",
        "DT:a NN:glass NN:cooktop",
    ],
    usages: &[
        ("wash", "in", "DT:the NN:dishwasher"),
        ("put", "in", "DT:the NN:oven"),
        ("store", "in", "DT:the NN:freezer"),
        ("use", "on", "DT:a NN:campfire"),
    ],
    conditions_yes: &[
        "VB:use DT:the JJ:high NN:setting",
        "VB:buy DT:the JJ:deluxe NN:bundle",
        "VB:order DT:the JJ:larger NN:size",
    ],
    conditions_no: &[
        "VB:use DT:the JJ:low NN:setting",
        "VB:buy DT:the NN:starter NN:bundle",
        "VB:order DT:the JJ:smaller NN:size",
    ],
};

static OUTDOOR: Inventory = Inventory {
    products: &[
        "NNP:Coleman NNP:Sundome NN:tent",
        "NNP:Osprey NNP:Atmos CD:65 NN:backpack",
        "NNP:Yeti NNP:Tundra CD:45 NN:cooler",
        "NNP:Garmin NNP:Instinct CD:2 NN:watch",
        "NNP:Petzl NNP:Actik NN:headlamp",
        "NNP:Patagonia NNP:Torrentshell NN:jacket",
        "NNP:Hydro NNP:Flask NNP:Trail NN:bottle",
        "NNP:Therm-a-Rest NNP:NeoAir NN:mattress",
    ],
    features: &[
        "DT:a NN:rain NN:fly",
        "DT:a NN:hip NN:belt",
        "DT:a JJ:built-in NN:compass",
        "DT:a NN:hood",
        "DT:a JJ:waterproof NN:zipper",
        "DT:a JJ:red NN:light NN:mode",
        "DT:a NN:drain NN:plug",
        "DT:a NN:mesh NN:pocket",
        "DT:a JJ:rechargeable NN:battery",
        "DT:a NN:carry NN:handle",
    ],
    accessories: &[
        "DT:a NN:stuff NN:sack",
        "DT:a NN:repair NN:kit",
        "DT:a NN:rain NN:cover",
        "DT:a NN:carabiner",
        "DT:a NN:charging NN:cable",
        "JJ:extra NNS:stakes",
    ],
    devices: &[
        "DT:a NN:trekking NN:pole",
        "DT:a NN:hydration NN:bladder",
        "DT:a NN:bike NN:rack",
        "DT:a NN:phone NN:app",
        "DT:a JJ:solar NN:panel",
    ],
    usages: &[
        ("use", "in", "DT:the NN:snow"),
        ("take", "on", "DT:a JJ:long NN:hike"),
        ("leave", "in", "DT:the NN:sun"),
        ("wash", "in", "DT:the NN:machine"),
    ],
    conditions_yes: &[
        "VB:add DT:the NN:footprint",
        "VB:buy DT:the JJ:winter NN:edition",
        "VB:apply DT:the NN:sealant",
    ],
    conditions_no: &[
        "VB:remove DT:the NN:liner",
        "VB:buy DT:the NN:summer NN:edition",
        "VB:skip DT:the NN:sealant",
    ],
};

/// Words a target may use beyond the tokens of its input.
pub const FUNCTION_WORDS: &[&str] = &[
    "yes", "no", ",", ".", "the", "does", "not", "have", "has", "comes", "come", "you", "can",
    "cannot", "also", "it", "but", "instead", "if", "use", "with",
];
