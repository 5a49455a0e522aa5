#pragma once

#include "analysis.hpp"
#include "channel.hpp"
#include "coding.hpp"
#include "config.hpp"
#include "loader.hpp"
#include "montecarlo.hpp"
#include "reception.hpp"
#include "sweep.hpp"
#include "units.hpp"
