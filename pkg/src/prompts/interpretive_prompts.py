#!/usr/bin/env python3
"""
解释性提示词模板
三类设计角度（动作分解、同义改写、身体部位）的指令文本、示例与离线样例，
以及标签模板（前缀/后缀）
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple


class Aspect(str, Enum):
    """解释性提示词的设计角度"""
    DECOMPOSITION = "decomposition"
    SYNONYM = "synonym"
    BODY_PARTS = "body_parts"


WORD_LIMIT = 76

# 动作分解指令
DECOMPOSITION_COMMAND = (
    "Below, I will provide you with some action nouns. Please provide a simple and detailed "
    "description (explanation) about the action decomposition of these action nouns. Please note "
    "that the sentence length of the description should not exceed 76 words."
)

# 同义改写指令
SYNONYM_COMMAND = (
    "Below, I will provide you with some action nouns or phrases. Please provide many words and "
    "phrases that share the same central concept as these action nouns or phrases but have more "
    "diverse expressions. Please note that your reply should not exceed 76 words in length."
)

# 身体部位指令
BODY_PARTS_COMMAND = (
    "Below, I will provide you with some action nouns. Please describe these actions based on "
    "their nouns and possible body parts involved. Please note that the sentence length of your "
    "response should not exceed 76 words."
)

DECOMPOSITION_EXAMPLES: List[Tuple[str, str]] = [
    ("abseiling",
     "Abseiling combines several actions to descend a vertical surface with a rope. Climbers "
     "secure themselves with a harness and utilize a descender device for controlled descent. "
     "Simple actions, like maintaining a straight body position and regulating rope tension, form "
     "the basis. Abseiling demands proper training, safety measures, and is popular in adventure "
     "sports and rescue operations, allowing individuals to experience controlled descent in "
     "various settings."),
    ("air drumming",
     "Air drumming is a rhythmic expression where individuals simulate playing drums without "
     "physical instruments. Simple actions, like mimicking drumming motions in the air, combine to "
     "create this imaginative and playful activity. Enthusiasts use their hands and feet to "
     "imitate drumming patterns, syncing with music. It's a spontaneous, enjoyable gesture often "
     "done during music listening or live performances, showcasing one's connection to the rhythm "
     "without the need for actual drums or drumsticks."),
    ("answering questions",
     "Answering questions involves providing responses to queries posed by others. Simple actions "
     "like active listening, comprehension, and concise articulation combine in this communicative "
     "process. It is fundamental in various contexts, facilitating information exchange and "
     "problem-solving. Respondents draw on their knowledge and expertise to address inquiries, "
     "contributing to effective communication and fostering understanding between individuals or "
     "groups."),
]

SYNONYM_EXAMPLES: List[Tuple[str, str]] = [
    ("Cutting in the kitchen",
     "Slicing, dicing, chopping, mincing, cleaving, carving, trimming, preparing ingredients."),
    ("driving car",
     "Operating a vehicle, maneuvering behind the wheel, navigating the road, piloting an "
     "automobile, steering, cruising, commuting by car, motoring."),
    ("Walking With Dog",
     "Strolling with a canine companion, ambling with a pet, promenading with a pup, hiking with a "
     "furry friend, sauntering alongside a dog, wandering with a four-legged buddy, leash-walking, "
     "trotting with a pooch."),
]

BODY_PARTS_EXAMPLES: List[Tuple[str, str]] = [
    ("Cutting in the kitchen",
     "Using a sharp knife, fingers gripping the handle, hand guiding the blade through ingredients "
     "on a cutting board, wrist controlling the motion, fingers curling slightly to hold the food "
     "steady, precision applied to achieve desired shapes or sizes, ensuring safety and efficiency "
     "during food preparation."),
    ("driving car",
     "Gripping the steering wheel, hands adjusting position, fingers pressing pedals for "
     "acceleration and braking, eyes scanning surroundings for obstacles, feet coordinating between "
     "clutch, brake, and accelerator, body positioned comfortably in the driver's seat, mind "
     "focused on navigation and traffic signals, reacting swiftly to changing road conditions."),
    ("Walking With Dog",
     "Leash in hand, fingers securing grip, arm relaxed as it swings alongside the body, legs "
     "moving in tandem with the dog's pace, feet stepping forward with purpose, eyes attentive to "
     "the dog's behavior and surroundings, occasional stops for sniffing or marking, a bond of "
     "companionship evident in synchronized movement."),
]

# 合成运动数据集的手写解释（离线使用，来源标记为 manual）
MOTION_INTERPRETATIONS: Dict[str, Dict[str, str]] = {
    "moving left": {
        Aspect.DECOMPOSITION.value: "A bright square starts on one side and shifts one step to the "
                                    "left in every frame, wrapping around the edge.",
        Aspect.SYNONYM.value: "Drifting left, sliding leftward, heading west, travelling to the left.",
    },
    "moving right": {
        Aspect.DECOMPOSITION.value: "A bright square starts on one side and shifts one step to the "
                                    "right in every frame, wrapping around the edge.",
        Aspect.SYNONYM.value: "Drifting right, sliding rightward, heading east, travelling to the right.",
    },
    "moving up": {
        Aspect.DECOMPOSITION.value: "A bright square starts low and rises one step in every frame, "
                                    "wrapping from the top edge to the bottom.",
        Aspect.SYNONYM.value: "Rising, climbing, ascending, heading north, travelling upward.",
    },
    "moving down": {
        Aspect.DECOMPOSITION.value: "A bright square starts high and falls one step in every frame, "
                                    "wrapping from the bottom edge to the top.",
        Aspect.SYNONYM.value: "Falling, sinking, descending, heading south, travelling downward.",
    },
}

# 标签模板，{label} 处填入类别短语
LABEL_TEMPLATES: List[str] = [
    "a video of a person {label}.",
    "a clip of {label}.",
    "{label}, a video of an action.",
    "a video showing {label}.",
    "human action of {label}.",
    "a short video of something {label}.",
    "a scene of {label}.",
]

COMMANDS: Dict[Aspect, str] = {
    Aspect.DECOMPOSITION: DECOMPOSITION_COMMAND,
    Aspect.SYNONYM: SYNONYM_COMMAND,
    Aspect.BODY_PARTS: BODY_PARTS_COMMAND,
}

EXAMPLES: Dict[Aspect, List[Tuple[str, str]]] = {
    Aspect.DECOMPOSITION: DECOMPOSITION_EXAMPLES,
    Aspect.SYNONYM: SYNONYM_EXAMPLES,
    Aspect.BODY_PARTS: BODY_PARTS_EXAMPLES,
}


def get_command(aspect: Aspect) -> str:
    return COMMANDS[Aspect(aspect)]


def get_examples(aspect: Aspect) -> List[Tuple[str, str]]:
    return list(EXAMPLES[Aspect(aspect)])


def get_fixture(aspect: Aspect, concept: str) -> Optional[Tuple[str, str]]:
    """离线样例：返回 (文本, 来源)，没有时返回 None"""
    aspect = Aspect(aspect)
    key = concept.strip().lower()
    for example_concept, text in EXAMPLES[aspect]:
        if example_concept.lower() == key:
            return text, "fixture"
    manual = MOTION_INTERPRETATIONS.get(key, {}).get(aspect.value)
    if manual:
        return manual, "manual"
    return None


def fill_template(template: str, label: str) -> str:
    return template.format(label=label)
