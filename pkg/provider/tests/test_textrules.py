from noteval_provider.textrules import sentence_segments, tokenize


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("Knee pain, since May.") == ["knee", "pain", "since", "may"]


def test_tokenize_splits_on_underscore_and_keeps_digits():
    assert tokenize("bp_120/80 read_me") == ["bp", "120", "80", "read", "me"]


def test_tokenize_empty():
    assert tokenize("") == []
    assert tokenize("--- !!") == []


def test_sentence_segments_split_on_newline_and_terminator():
    text = "Knee pain since May. Advised rest.\nReview in 2 weeks."
    assert sentence_segments(text) == [
        "Knee pain since May.",
        "Advised rest.",
        "Review in 2 weeks.",
    ]


def test_sentence_segments_need_following_capital_or_digit():
    # "e.g. the" stays one unit: lowercase after the terminator
    assert sentence_segments("Take meds e.g. the blue ones") == [
        "Take meds e.g. the blue ones"
    ]
    assert sentence_segments("Dose cut. 2 weeks off.") == ["Dose cut.", "2 weeks off."]


def test_sentence_segments_drop_blank_and_punctuation_only_lines():
    assert sentence_segments("Plan:\n\n...\nrest") == ["Plan:", "rest"]
