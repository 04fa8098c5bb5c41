public ResponseEntity<byte[]> exportReport(@RequestParam String format, @RequestParam String from, @RequestParam String to) {
    if (!EXPORT_FORMATS.contains(format)) {
        return ResponseEntity.badRequest().build();
    }
    LocalDate start;
    LocalDate end;
    try {
        start = LocalDate.parse(from);
        end = LocalDate.parse(to);
    } catch (DateTimeParseException e) {
        return ResponseEntity.badRequest().build();
    }
    if (end.isBefore(start) || ChronoUnit.DAYS.between(start, end) > 366) {
        return ResponseEntity.badRequest().build();
    }
    return ResponseEntity.ok(reportService.export(format, start, end));
}
