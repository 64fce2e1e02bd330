"""Text prompts sent to the inference backends.

These strings are part of the pipeline's observable behaviour and are checked
byte-for-byte by the test suite; do not reflow or "fix" them (the spelling of
"coincise" included).
"""

BASELINE_PROMPT = "A photo of an opened sleeves clothing with 45-degree arm-torso angle"

LONG_SLEEVE_CONTEXT = (
    "Your job is to detect if the upper body garment has long sleeves or not. "
    "Return a boolean answer True or False. Be coincise"
)
LONG_SLEEVE_PREAMBLE = "Detect from the following garment description if the garment has long sleeves: "

LOGO_DETECTION_PROMPT = "Brand logo. Brand icon. Garment. Lanyard. Neck. Pockets"

LOGO_SUPPRESSION_POSITIVE = "cloth, (uniform color), (clear color, solid color), pure color"
LOGO_SUPPRESSION_NEGATIVE = (
    "(shirt buttons), logos, figures, stamps, printings, drawings, zips, sketches, lines, "
    "(tape, ribbon, belt, bow), icons, texts, letters, labels, words, symbols, horror, bad, distorted"
)

# positive prompt for unsampling is the garment caption, produced at run time
UNSAMPLING_NEGATIVE = (
    "(deformed iris, deformed pupils, semi-realistic, cgi, 3d, render, sketch, cartoon, drawing, "
    "anime:1.4), text, close up, cropped, out of frame, worst quality, low quality, jpeg artifacts, "
    "ugly, duplicate, morbid, mutilated, extra fingers, mutated hands, poorly drawn hands, "
    "poorly drawn face, mutation, deformed, blurry, dehydrated, bad anatomy, bad proportions, "
    "extra limbs, cloned face, disfigured, gross proportions, malformed limbs, missing arms, "
    "missing legs, extra arms, extra legs, fused fingers, too many fingers, long neck"
)


def long_sleeve_prompt(caption: str) -> str:
    return LONG_SLEEVE_PREAMBLE + caption


ALL_PROMPTS = {
    "baseline": BASELINE_PROMPT,
    "long_sleeve.context": LONG_SLEEVE_CONTEXT,
    "long_sleeve.preamble": LONG_SLEEVE_PREAMBLE,
    "logo.detection": LOGO_DETECTION_PROMPT,
    "logo.suppression.positive": LOGO_SUPPRESSION_POSITIVE,
    "logo.suppression.negative": LOGO_SUPPRESSION_NEGATIVE,
    "unsampling.negative": UNSAMPLING_NEGATIVE,
}
