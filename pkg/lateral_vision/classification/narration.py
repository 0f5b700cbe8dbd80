"""
Human readable interpretation of decision traces
"""
from typing import Optional

from .class_matrix import NORMALIZED_MAX
from .types import DecisionRule, DecisionTrace, ScoreListing, ScoreScale

# Listing names used by the engine
LISTING_PHRASES = (
    ('hlp', 'holistic-level predicts'),
    ('deep_clp', 'constituent-level deep models predict'),
    ('rf_clp', 'constituent-level RF models predict'),
)


def describe_listing(listing: Optional[ScoreListing]) -> str:
    """
    :return: `100.00% class-49 and 61.73% class-1`, raw scores have no percent sign. Zero scores after
        the first one are left out
    """
    if listing is None or not listing.entries:
        return 'nothing'
    factor = NORMALIZED_MAX if listing.scale is ScoreScale.PROBABILITY else 1.
    unit = '' if listing.scale is ScoreScale.RAW else '%'
    parts = [f'{score * factor:.2f}{unit} {label}' for i, (label, score) in enumerate(listing.entries)
             if i == 0 or score > 0.]
    return ' and '.join(parts)


def narrate(trace: DecisionTrace) -> str:
    sentences = [f'{phrase} {describe_listing(trace.listings.get(name))}'
                 for name, phrase in LISTING_PHRASES if name in trace.listings]
    text = f'Image {trace.image_id}: ' + '; '.join(sentences) + '.'
    if trace.rule is DecisionRule.INHIBIT:
        return text + f' Context phase is confident, attention phase inhibited. Final prediction {trace.final_label}.'
    if trace.rule is DecisionRule.MAJORITY:
        return text + (f' {int(trace.final.score)} perceptions support {trace.final_label}. '
                       f'Final prediction {trace.final_label}.')
    return text + (f' No two perceptions agree, final class matrix gives '
                   f'{describe_listing(trace.listings.get("final"))}. Final prediction {trace.final_label}.')
