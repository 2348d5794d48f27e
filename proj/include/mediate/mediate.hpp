#pragma once

#include "mediate/data.hpp"
#include "mediate/effects.hpp"
#include "mediate/error.hpp"
#include "mediate/estimators.hpp"
#include "mediate/lsem.hpp"
#include "mediate/numeric.hpp"
#include "mediate/random.hpp"
#include "mediate/report_io.hpp"
