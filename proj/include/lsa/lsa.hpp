#pragma once

// Umbrella header for the LSA aspect-based recommender library.

#include "lsa/cli.hpp"
#include "lsa/corpus.hpp"
#include "lsa/evaluation.hpp"
#include "lsa/graph.hpp"
#include "lsa/model.hpp"
#include "lsa/selection.hpp"
#include "lsa/synth.hpp"
#include "lsa/training.hpp"
