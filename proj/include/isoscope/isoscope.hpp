#pragma once

#include "isoscope/analysis.hpp"
#include "isoscope/baselines.hpp"
#include "isoscope/corpus_filter.hpp"
#include "isoscope/error.hpp"
#include "isoscope/formats.hpp"
#include "isoscope/geometry.hpp"
#include "isoscope/isoscore.hpp"
#include "isoscope/records.hpp"
#include "isoscope/report.hpp"
#include "isoscope/synth.hpp"
#include "isoscope/version.hpp"
