#pragma once

#include "ladr/bench.hpp"
#include "ladr/corpus.hpp"
#include "ladr/dense.hpp"
#include "ladr/eval.hpp"
#include "ladr/graph.hpp"
#include "ladr/lexical.hpp"
#include "ladr/search.hpp"
#include "ladr/types.hpp"
