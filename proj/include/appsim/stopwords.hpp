// Copyright 2026 The appsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <string_view>

namespace appsim {

// English stopwords, in the apostrophe-free form the tokenizer produces.
// Changing this list changes every text embedding; its digest is recorded in
// run manifests.
inline constexpr std::array<std::string_view, 153> kEnglishStopwords = {
    "a",          "about",    "above",   "after",   "again",    "against",
    "ain",        "all",      "am",      "an",      "and",      "any",
    "are",        "aren",     "as",      "at",      "be",       "because",
    "been",       "before",   "being",   "below",   "between",  "both",
    "but",        "by",       "can",     "couldn",  "d",        "did",
    "didn",       "do",       "does",    "doesn",   "doing",    "don",
    "down",       "during",   "each",    "few",     "for",      "from",
    "further",    "had",      "hadn",    "has",     "hasn",     "have",
    "haven",      "having",   "he",      "her",     "here",     "hers",
    "herself",    "him",      "himself", "his",     "how",      "i",
    "if",         "in",       "into",    "is",      "isn",      "it",
    "its",        "itself",   "just",    "ll",      "m",        "ma",
    "me",         "mightn",   "more",    "most",    "mustn",    "my",
    "myself",     "needn",    "no",      "nor",     "not",      "now",
    "o",          "of",       "off",     "on",      "once",     "only",
    "or",         "other",    "our",     "ours",    "ourselves", "out",
    "over",       "own",      "re",      "s",       "same",     "shan",
    "she",        "should",   "shouldn", "so",      "some",     "such",
    "t",          "than",     "that",    "the",     "their",    "theirs",
    "them",       "themselves", "then",  "there",   "these",    "they",
    "this",       "those",    "through", "to",      "too",      "under",
    "until",      "up",       "ve",      "very",    "was",      "wasn",
    "we",         "were",     "weren",   "what",    "when",     "where",
    "which",      "while",    "who",     "whom",    "why",      "will",
    "with",       "won",      "wouldn",  "y",       "you",      "your",
    "yours",      "yourself", "yourselves",
};

}  // namespace appsim
