#pragma once

// One in-memory database serving every corpus query in query_corpus.hpp.
// The Subjects collection is engineered so the case-study pair of queries
// returns 7 documents each, the multiset of date_of_completion values equals
// the multiset of date_test_taken values (same values, different fields),
// and the first emitted documents carry the pinned dates.

#include <string>
#include <vector>

#include "mqlkit/document_db.hpp"
#include "mqlkit/loose_json.hpp"

namespace fixtures {

inline std::vector<mqlkit::DocValue> docs_from(const std::string& json_array) {
  mqlkit::DocValue v = mqlkit::loose_json_decode(json_array);
  std::vector<mqlkit::DocValue> docs;
  for (const mqlkit::DocValue& d : v.elements()) docs.push_back(d);
  return docs;
}

inline mqlkit::DocumentDatabase corpus_db() {
  mqlkit::DocumentDatabase db;
  db.name = "corpus";

  db.collections["people"] = docs_from(R"([
    {_id: 1, Name: "Mike Weir", Country: "USA", Age: 34},
    {_id: 2, Name: "Juli Hanson", Country: "USA", Age: 41},
    {_id: 3, Name: "Ricky Barnes", Country: "France", Age: 29}
  ])");

  db.collections["train"] = docs_from(R"([
    {_id: 1, Name: "Ananthapuri Express", Time: "17:15", Service: "Daily",
     Origin: "Trivandrum"},
    {_id: 2, Name: "Guruvayur Express", Time: "22:10", Service: "Daily",
     Origin: "Chennai"}
  ])");

  db.collections["Ref_Colors"] = docs_from(R"([
    {_id: 1, Colour: "red", Products: ["hammer", "wrench"]},
    {_id: 2, Colour: "blue", Products: ["saw", "drill", "chisel"]},
    {_id: 3, Colour: "green", Products: ["file"]}
  ])");

  // Seven Fail tests overall. Completions run v1..v7 in emission order while
  // the paired test dates run v2..v7,v1: equal multisets, different fields.
  db.collections["Subjects"] = docs_from(R"([
    {_id: 1, Subject_ID: 10, Subject_Name: "Databases", Courses: [
      {Course_ID: 101, Course_Name: "database", Student_Course_Enrolment: [
        {Registration_ID: 1, Student_ID: 31,
         date_of_enrolment: "2017-11-02 09:00:00",
         date_of_completion: "2018-03-04 01:24:56",
         Student_Tests_Taken: [
           {date_test_taken: "2018-03-22 13:10:06", test_result: "Fail"}
         ]},
        {Registration_ID: 2, Student_ID: 32,
         date_of_enrolment: "2017-11-09 09:00:00",
         date_of_completion: "2018-07-14 08:15:22",
         Student_Tests_Taken: [
           {date_test_taken: "2018-03-05 10:00:00", test_result: "Pass"}
         ]}
      ]},
      {Course_ID: 102, Course_Name: "advanced database", Student_Course_Enrolment: [
        {Registration_ID: 3, Student_ID: 33,
         date_of_enrolment: "2017-12-01 09:00:00",
         date_of_completion: "2018-03-22 13:10:06",
         Student_Tests_Taken: [
           {date_test_taken: "2018-01-11 07:45:31", test_result: "Fail"}
         ]},
        {Registration_ID: 4, Student_ID: 34,
         date_of_enrolment: "2017-12-05 09:00:00",
         date_of_completion: "2018-01-11 07:45:31",
         Student_Tests_Taken: [
           {date_test_taken: "2018-02-28 22:03:12", test_result: "Fail"},
           {date_test_taken: "2018-03-29 14:30:00", test_result: "Pass"}
         ]}
      ]}
    ]},
    {_id: 2, Subject_ID: 20, Subject_Name: "Computing", Courses: [
      {Course_ID: 201, Course_Name: "machine learning", Student_Course_Enrolment: [
        {Registration_ID: 5, Student_ID: 35,
         date_of_enrolment: "2018-01-08 09:00:00",
         date_of_completion: "2018-02-28 22:03:12",
         Student_Tests_Taken: [
           {date_test_taken: "2018-04-21 09:10:00", test_result: "Pass"},
           {date_test_taken: "2018-04-19 09:58:44", test_result: "Fail"}
         ]},
        {Registration_ID: 6, Student_ID: 36,
         date_of_enrolment: "2018-01-15 09:00:00",
         date_of_completion: "2018-04-19 09:58:44",
         Student_Tests_Taken: [
           {date_test_taken: "2018-05-06 16:21:07", test_result: "Fail"}
         ]}
      ]},
      {Course_ID: 202, Course_Name: "networking", Student_Course_Enrolment: [
        {Registration_ID: 7, Student_ID: 37,
         date_of_enrolment: "2018-02-01 09:00:00",
         date_of_completion: "2018-05-06 16:21:07",
         Student_Tests_Taken: [
           {date_test_taken: "2018-06-30 11:34:59", test_result: "Fail"}
         ]}
      ]}
    ]},
    {_id: 3, Subject_ID: 30, Subject_Name: "Statistics", Courses: [
      {Course_ID: 301, Course_Name: "probability", Student_Course_Enrolment: [
        {Registration_ID: 8, Student_ID: 38,
         date_of_enrolment: "2018-02-19 09:00:00",
         date_of_completion: "2018-06-30 11:34:59",
         Student_Tests_Taken: [
           {date_test_taken: "2018-03-04 01:24:56", test_result: "Fail"}
         ]},
        {Registration_ID: 9, Student_ID: 39,
         date_of_enrolment: "2018-02-26 09:00:00",
         date_of_completion: "2018-08-02 19:40:13",
         Student_Tests_Taken: [
           {date_test_taken: "2018-08-03 18:00:00", test_result: "Pass"}
         ]}
      ]}
    ]}
  ])");

  db.collections["Courses"] = docs_from(R"([
    {_id: 1, Course_ID: 101, Course_Name: "database"},
    {_id: 2, Course_ID: 102, Course_Name: "advanced database"},
    {_id: 3, Course_ID: 201, Course_Name: "machine learning"}
  ])");

  db.collections["Restaurant"] = docs_from(R"([
    {_id: 1, ResName: "Subway", Address: "3233 St Paul St", Rating: 4},
    {_id: 2, ResName: "Honeygrow", Address: "3731 Walnut St", Rating: 5}
  ])");

  db.collections["Staff"] = docs_from(R"([
    {_id: 1, first_name: "Elsa", last_name: "Jaskolski",
     email_address: "WRAU.j@example.com"},
    {_id: 2, first_name: "Kip", last_name: "Gerlach",
     email_address: "kip.gerlach@example.com"},
    {_id: 3, first_name: "Otto", last_name: "Schuster",
     email_address: "wraunow@example.net"}
  ])");

  db.collections["Faculty"] = docs_from(R"([
    {_id: 1, Fname: "Linda", Lname: "Smith", Course: [
      {CID: 1, CName: "COMPUTER LITERACY"}, {CID: 2, CName: "ALGEBRA"}]},
    {_id: 2, Fname: "Mark", Lname: "Jones", Course: [
      {CID: 3, CName: "CALCULUS"}]},
    {_id: 3, Fname: "Ann", Lname: "Lee", Course:
      {CID: 4, CName: "COMPUTER LITERACY"}}
  ])");

  db.collections["pilot"] = docs_from(R"([
    {_id: 1, Pilot_name: "Patrick Tambay", Nationality: "France"},
    {_id: 2, Pilot_name: "Carlos Reutemann", Nationality: "Spain"},
    {_id: 3, Pilot_name: "Didier Pironi", Nationality: "France"},
    {_id: 4, Pilot_name: "Elio de Angelis", Nationality: "Italy"}
  ])");

  db.collections["company"] = docs_from(R"([
    {_id: 1, Company: "ExxonMobil", Company_ID: 1, Main_Industry: "Oil and gas"},
    {_id: 2, Company: "Apple", Company_ID: 2, Main_Industry: "Technology"},
    {_id: 3, Company: "Total", Company_ID: 3, Main_Industry: "Oil and gas"}
  ])");

  db.collections["gas_station"] = docs_from(R"([
    {_id: 10, Station_ID: 1, Location: "Herne Hill",
     station_company: {Company_ID: 1, Rank: 2}},
    {_id: 11, Station_ID: 2, Location: "Channel Hill",
     station_company: {Company_ID: 3, Rank: 4}}
  ])");

  db.collections["departments"] = docs_from(R"([
    {_id: 1, DEPARTMENT_NAME: "IT", LOCATION_ID: 1400, employees: [
      {EMPLOYEE_ID: 103, FIRST_NAME: "Alexander", LAST_NAME: "Hunold"},
      {EMPLOYEE_ID: 104, FIRST_NAME: "Bruce", LAST_NAME: "Ernst"}]},
    {_id: 2, DEPARTMENT_NAME: "Sales", LOCATION_ID: 2500, employees: [
      {EMPLOYEE_ID: 145, FIRST_NAME: "John", LAST_NAME: "Russell"}]}
  ])");

  db.collections["regions"] = docs_from(R"([
    {_id: 1, REGION_NAME: "Europe", countries: [
      {COUNTRY_NAME: "United Kingdom", locations: [{LOCATION_ID: 2500}]},
      {COUNTRY_NAME: "Germany", locations: [{LOCATION_ID: 2700}]}]},
    {_id: 2, REGION_NAME: "Americas", countries: [
      {COUNTRY_NAME: "United States of America", locations: [
        {LOCATION_ID: 1400}, {LOCATION_ID: 1700}]}]}
  ])");

  return db;
}

}  // namespace fixtures
