#pragma once

#include "techscan/text.hpp"
#include "techscan/dsl.hpp"
#include "techscan/match.hpp"
#include "techscan/scoring.hpp"
#include "techscan/csv.hpp"
#include "techscan/corpus.hpp"
#include "techscan/validation.hpp"
