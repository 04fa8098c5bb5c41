public ResponseEntity<Resource> downloadFile(@RequestParam String name) throws IOException {
    Path target = Paths.get(BASE_DIR.toString(), name);
    return ResponseEntity.ok(new FileSystemResource(target));
}
