//! BLEU and ROUGE-L values from sacrebleu 2.6.0 (tokenize=none, smooth=none) and
//! rouge-score 0.1.2 (whitespace tokenizer). The smoothed column applies add-one
//! on zero higher-order counts to sacrebleu's own n-gram statistics. ROUGE F uses
//! beta = 1.2 on rouge-score's precision and recall.
#![allow(dead_code)]

pub struct OraclePair {
    pub hyp: &'static str,
    pub reference: &'static str,
    pub bleu: f64,
    pub bleu_smoothed: f64,
    pub rouge_p: f64,
    pub rouge_r: f64,
    pub rouge_f: f64,
}

pub const CORPUS_BLEU: f64 = 58.383162045739304;
pub const CORPUS_BLEU_SMOOTHED: f64 = 58.3831620457393;

pub const PAIRS: [OraclePair; 25] = [
    OraclePair {
        hyp: "yes , the dell xps 13 laptop does have a webcam .",
        reference: "yes , the dell xps 13 laptop does have a webcam .",
        bleu: 100.0,
        bleu_smoothed: 100.0,
        rouge_p: 1.0,
        rouge_r: 1.0,
        rouge_f: 1.0,
    },
    OraclePair {
        hyp: "no , the dell xps 13 laptop does not have a webcam .",
        reference: "no , the dell xps 13 laptop does not have a touchscreen .",
        bleu: 84.236267,
        bleu_smoothed: 84.236267,
        rouge_p: 0.923077,
        rouge_r: 0.923077,
        rouge_f: 0.923077,
    },
    OraclePair {
        hyp: "yes , you can use it .",
        reference: "yes , you can use the apple ipad air tablet with a mac .",
        bleu: 23.671529,
        bleu_smoothed: 23.671529,
        rouge_p: 0.857143,
        rouge_r: 0.428571,
        rouge_f: 0.539028,
    },
    OraclePair {
        hyp: "the cat sat",
        reference: "the cat sat down",
        bleu: 0.0,
        bleu_smoothed: 71.653131,
        rouge_p: 1.0,
        rouge_r: 0.75,
        rouge_f: 0.835616,
    },
    OraclePair {
        hyp: "no , but it has a hood instead .",
        reference: "no , the coleman sundome tent does not have a rain fly . but it has a hood instead .",
        bleu: 23.666979,
        bleu_smoothed: 23.666979,
        rouge_p: 1.0,
        rouge_r: 0.45,
        rouge_f: 0.580952,
    },
    OraclePair {
        hyp: "yes , the ninja foodi blender comes with a spatula . also , it comes with a travel lid .",
        reference: "yes , the ninja foodi blender comes with a spatula . also , it comes with a recipe book .",
        bleu: 84.923266,
        bleu_smoothed: 84.923266,
        rouge_p: 0.9,
        rouge_r: 0.9,
        rouge_f: 0.9,
    },
    OraclePair {
        hyp: "yes , yes , yes , yes",
        reference: "yes , the lodge classic skillet does have a glass lid .",
        bleu: 0.0,
        bleu_smoothed: 9.771349,
        rouge_p: 0.285714,
        rouge_r: 0.166667,
        rouge_f: 0.200988,
    },
    OraclePair {
        hyp: "no , you cannot wash the yeti tundra 45 cooler in the machine .",
        reference: "no , you cannot wash the yeti tundra 45 cooler in the machine if you remove the liner .",
        bleu: 65.525296,
        bleu_smoothed: 65.525296,
        rouge_p: 1.0,
        rouge_r: 0.736842,
        rouge_f: 0.825919,
    },
    OraclePair {
        hyp: "a b c d",
        reference: "a c d e",
        bleu: 0.0,
        bleu_smoothed: 45.1801,
        rouge_p: 0.75,
        rouge_r: 0.75,
        rouge_f: 0.75,
    },
    OraclePair {
        hyp: "the the the the",
        reference: "the cat is on the mat",
        bleu: 0.0,
        bleu_smoothed: 23.043182,
        rouge_p: 0.5,
        rouge_r: 0.333333,
        rouge_f: 0.386076,
    },
    OraclePair {
        hyp: "yes , you can take the jbl flip 5 speaker on a plane if you use an adapter .",
        reference: "yes , you can take the jbl flip 5 speaker on a plane if you use an adapter .",
        bleu: 100.0,
        bleu_smoothed: 100.0,
        rouge_p: 1.0,
        rouge_r: 1.0,
        rouge_f: 1.0,
    },
    OraclePair {
        hyp: "you can",
        reference: "yes , you can mount the lg ultragear 27 monitor on the wall .",
        bleu: 0.0,
        bleu_smoothed: 0.247875,
        rouge_p: 1.0,
        rouge_r: 0.142857,
        rouge_f: 0.220217,
    },
    OraclePair {
        hyp: "no , the petzl actik headlamp does not come with a carabiner . but it comes with a charging cable instead .",
        reference: "no , the petzl actik headlamp does not come with a carabiner . but it comes with a repair kit instead .",
        bleu: 83.757179,
        bleu_smoothed: 83.757179,
        rouge_p: 0.909091,
        rouge_r: 0.909091,
        rouge_f: 0.909091,
    },
    OraclePair {
        hyp: "yes , it does have a timer .",
        reference: "yes , the breville smart oven does have a timer .",
        bleu: 40.866465,
        bleu_smoothed: 40.866465,
        rouge_p: 0.875,
        rouge_r: 0.636364,
        rouge_f: 0.716443,
    },
    OraclePair {
        hyp: "no , not if you skip the update .",
        reference: "no , the sony bravia x90 television does not come with a wall mount if you skip the update .",
        bleu: 20.042133,
        bleu_smoothed: 20.042133,
        rouge_p: 1.0,
        rouge_r: 0.45,
        rouge_f: 0.580952,
    },
    OraclePair {
        hyp: "i love it .",
        reference: "yes , the instant pot duo cooker does have a keep-warm setting .",
        bleu: 0.0,
        bleu_smoothed: 3.367205,
        rouge_p: 0.25,
        rouge_r: 0.076923,
        rouge_f: 0.107394,
    },
    OraclePair {
        hyp: "yes , the garmin instinct 2 watch does have a built-in compass . also , it has a rechargeable battery .",
        reference: "yes , the garmin instinct 2 watch does have a built-in compass . also , it has a rechargeable battery .",
        bleu: 100.0,
        bleu_smoothed: 100.0,
        rouge_p: 1.0,
        rouge_r: 1.0,
        rouge_f: 1.0,
    },
    OraclePair {
        hyp: "yes , you can use the samsung galaxy a20 phone with a smart tv .",
        reference: "yes , you can use the samsung galaxy a20 phone with a car stereo .",
        bleu: 79.169639,
        bleu_smoothed: 79.169639,
        rouge_p: 0.866667,
        rouge_r: 0.866667,
        rouge_f: 0.866667,
    },
    OraclePair {
        hyp: "no , you cannot put the lodge classic skillet in the oven .",
        reference: "no , you cannot put the cuisinart elite processor in the dishwasher .",
        bleu: 44.082319,
        bleu_smoothed: 44.082319,
        rouge_p: 0.692308,
        rouge_r: 0.692308,
        rouge_f: 0.692308,
    },
    OraclePair {
        hyp: "the osprey atmos 65 backpack has a hip belt",
        reference: "yes , the osprey atmos 65 backpack does have a hip belt .",
        bleu: 38.275211,
        bleu_smoothed: 38.275211,
        rouge_p: 0.888889,
        rouge_r: 0.615385,
        rouge_f: 0.704185,
    },
    OraclePair {
        hyp: "yes",
        reference: "yes , you can .",
        bleu: 0.0,
        bleu_smoothed: 1.831564,
        rouge_p: 1.0,
        rouge_r: 0.2,
        rouge_f: 0.297561,
    },
    OraclePair {
        hyp: "no , the keurig k-mini brewer does not have a drip tray . but it has a timer instead .",
        reference: "no , the keurig k-mini brewer does not have a drip tray . but it has a digital display instead .",
        bleu: 83.131281,
        bleu_smoothed: 83.131281,
        rouge_p: 0.95,
        rouge_r: 0.904762,
        rouge_f: 0.922771,
    },
    OraclePair {
        hyp: "mat the on is cat the",
        reference: "the cat is on the mat",
        bleu: 0.0,
        bleu_smoothed: 30.213754,
        rouge_p: 0.5,
        rouge_r: 0.5,
        rouge_f: 0.5,
    },
    OraclePair {
        hyp: "yes , you can store the zojirushi neuro rice-cooker in the freezer if you order the larger size .",
        reference: "yes , you can store the zojirushi neuro rice-cooker in the freezer if you buy the deluxe bundle .",
        bleu: 73.70731,
        bleu_smoothed: 73.70731,
        rouge_p: 0.842105,
        rouge_r: 0.842105,
        rouge_f: 0.842105,
    },
    OraclePair {
        hyp: "no , the hydro flask trail bottle does not come with a stuff sack .",
        reference: "no , the hydro flask trail bottle does not come with a stuff sack . also , it does not come with extra stakes .",
        bleu: 51.341712,
        bleu_smoothed: 51.341712,
        rouge_p: 1.0,
        rouge_r: 0.6,
        rouge_f: 0.717647,
    },
];
