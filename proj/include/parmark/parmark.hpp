#pragma once

// Parameter-level watermarking toolkit for small autoregressive language
// models: keyed green-list selection, output-layer scaling, seeded
// generation, frequency z-test detection, perturbation attacks, perplexity
// scoring, and the experiment harness tying them together.

#include "parmark/attack.hpp"
#include "parmark/detect.hpp"
#include "parmark/embed.hpp"
#include "parmark/errors.hpp"
#include "parmark/eval.hpp"
#include "parmark/format.hpp"
#include "parmark/generate.hpp"
#include "parmark/greenlist.hpp"
#include "parmark/harness.hpp"
#include "parmark/matrix.hpp"
#include "parmark/model.hpp"
#include "parmark/rng.hpp"
#include "parmark/token.hpp"
