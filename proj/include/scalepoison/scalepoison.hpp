#pragma once

#include "scalepoison/error.hpp"
#include "scalepoison/imaging.hpp"
#include "scalepoison/codec.hpp"
#include "scalepoison/random.hpp"
#include "scalepoison/parallel.hpp"
#include "scalepoison/scaling.hpp"
#include "scalepoison/qp.hpp"
#include "scalepoison/attack.hpp"
#include "scalepoison/defense.hpp"
#include "scalepoison/poisoning.hpp"
#include "scalepoison/learner.hpp"
#include "scalepoison/harness.hpp"
